#include "ltm/runlog.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace ltm {

Compute compute_at_step(std::uint64_t batch_size, std::uint64_t n_params, std::uint64_t seq_len,
                        std::uint64_t step) {
  Compute c = 6;
  for (std::uint64_t factor : {batch_size, n_params, seq_len, step}) {
    Compute next = 0;
    if (__builtin_mul_overflow(c, static_cast<Compute>(factor), &next)) {
      throw std::overflow_error("compute exceeds 128-bit range");
    }
    c = next;
  }
  return c;
}

std::string compute_to_string(Compute c) {
  if (c == 0) return "0";
  std::string digits;
  while (c > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(c % 10)));
    c /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

Compute parse_compute(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty compute value");
  Compute c = 0;
  for (char ch : text) {
    if (ch < '0' || ch > '9') throw std::invalid_argument("bad compute value '" + text + "'");
    if (__builtin_mul_overflow(c, static_cast<Compute>(10), &c) ||
        __builtin_add_overflow(c, static_cast<Compute>(ch - '0'), &c)) {
      throw std::overflow_error("compute value too large: " + text);
    }
  }
  return c;
}

double compute_to_double(Compute c) { return static_cast<double>(c); }

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kCompleted:
      return "COMPLETED";
    case RunStatus::kEarlyStopped:
      return "EARLY_STOPPED";
    case RunStatus::kDiverged:
      return "DIVERGED";
  }
  return "UNKNOWN";
}

RunStatus parse_run_status(const std::string& text) {
  if (text == "COMPLETED") return RunStatus::kCompleted;
  if (text == "EARLY_STOPPED") return RunStatus::kEarlyStopped;
  if (text == "DIVERGED") return RunStatus::kDiverged;
  throw std::invalid_argument("unknown run status '" + text + "'");
}

namespace {

double number_or_nan(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

std::string to_json_line(const RunLogEntry& e, const std::string& config_hash, const std::string& run_id) {
  nlohmann::ordered_json j;
  j["step"] = e.step;
  j["lr"] = e.lr;
  j["train_nll"] = e.train_nll;
  j["test_mse"] = e.test_mse;
  j["test_crps"] = e.test_crps;
  j["test_nll"] = e.test_nll;
  j["test_loglik"] = e.test_loglik();
  // Exact integer; values past 64 bits fall back to a decimal string.
  if (e.compute <= static_cast<Compute>(UINT64_MAX)) {
    j["compute"] = static_cast<std::uint64_t>(e.compute);
  } else {
    j["compute"] = compute_to_string(e.compute);
  }
  j["config_hash"] = config_hash;
  j["run_id"] = run_id;
  j["wall_clock_s"] = e.wall_clock_s;
  return j.dump();
}

RunLogEntry parse_json_line(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  RunLogEntry e;
  e.step = j.at("step").get<int>();
  e.lr = number_or_nan(j.at("lr"));
  e.train_nll = number_or_nan(j.at("train_nll"));
  e.test_mse = number_or_nan(j.at("test_mse"));
  e.test_crps = number_or_nan(j.at("test_crps"));
  e.test_nll = number_or_nan(j.at("test_nll"));
  const auto& c = j.at("compute");
  e.compute = c.is_string() ? parse_compute(c.get<std::string>()) : static_cast<Compute>(c.get<std::uint64_t>());
  if (j.contains("wall_clock_s")) e.wall_clock_s = number_or_nan(j["wall_clock_s"]);
  return e;
}

std::vector<RunLogEntry> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log " + path.string());
  std::vector<RunLogEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_json_line(line));
  }
  return out;
}

}  // namespace ltm

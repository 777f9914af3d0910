#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ltm {

/// Training compute in FLOPs; 128-bit so 6 * B * N_p * L_seq * steps never wraps.
using Compute = unsigned __int128;

/// 6 * B * N_p * L_seq * step. Throws std::overflow_error if even 128 bits overflow.
Compute compute_at_step(std::uint64_t batch_size, std::uint64_t n_params, std::uint64_t seq_len,
                        std::uint64_t step);
std::string compute_to_string(Compute c);
Compute parse_compute(const std::string& text);
double compute_to_double(Compute c);

enum class RunStatus { kCompleted, kEarlyStopped, kDiverged };

std::string to_string(RunStatus status);
RunStatus parse_run_status(const std::string& text);

/// One evaluation's telemetry.
struct RunLogEntry {
  int step = 0;
  double lr = 0.0;
  double train_nll = 0.0;
  double test_mse = 0.0;
  double test_crps = 0.0;
  double test_nll = 0.0;
  Compute compute = 0;
  double wall_clock_s = 0.0;

  /// Log-likelihood as fitted: NLL + 2.
  double test_loglik() const { return test_nll + 2.0; }
};

/// JSON-lines record. Keys appear in a fixed order with wall_clock_s last.
std::string to_json_line(const RunLogEntry& entry, const std::string& config_hash, const std::string& run_id);
RunLogEntry parse_json_line(const std::string& line);

std::vector<RunLogEntry> read_run_log(const std::filesystem::path& path);

}  // namespace ltm

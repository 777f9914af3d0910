#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <deque>
#include <json.hpp>
#include <map>
#include <ostream>

#include "ltm/rng.hpp"
#include "ltmcli/cli.hpp"
#include "yaml_util.hpp"

extern char** environ;

namespace ltm::cli {

namespace fs = std::filesystem;

std::string to_string(CampaignKind k) {
  switch (k) {
    case CampaignKind::kParamScaling:
      return "param_scaling";
    case CampaignKind::kDataScaling:
      return "data_scaling";
    case CampaignKind::kLrSweep:
      return "lr_sweep";
    case CampaignKind::kArchSweep:
      return "arch_sweep";
  }
  return "unknown";
}

CampaignKind parse_campaign_kind(const std::string& text) {
  if (text == "param_scaling") return CampaignKind::kParamScaling;
  if (text == "data_scaling") return CampaignKind::kDataScaling;
  if (text == "lr_sweep") return CampaignKind::kLrSweep;
  if (text == "arch_sweep") return CampaignKind::kArchSweep;
  throw UsageError("unknown campaign kind '" + text + "' (param_scaling, data_scaling, lr_sweep, arch_sweep)");
}

void ExperimentPlan::validate() const {
  auto fail = [this](const std::string& msg) { throw UsageError("plan '" + name + "' rejected: " + msg); };
  if (corpus.empty()) fail("no corpus");
  if (models.empty()) fail("grid.models is empty");
  if (seed_policy != "per_cell" && seed_policy != "shared") fail("seed_policy must be per_cell or shared");
  if (backoff_retries < 0) fail("backoff.retries must be >= 0");
  if (!(backoff_factor > 0.0 && backoff_factor < 1.0)) fail("backoff.factor must lie in (0, 1)");
  for (const auto& m : models) {
    try {
      m.config.validate();
    } catch (const std::exception& e) {
      fail(e.what());
    }
    if (m.lr_max && !(*m.lr_max > 0.0)) fail("model lr_max must be positive");
  }
  for (double lr : lr_max) {
    if (!(lr > 0.0)) fail("lr_max values must be positive");
  }
  for (double f : f_d) {
    if (!(f > 0.0 && f <= 1.0)) fail("f_d values must lie in (0, 1]");
  }
  try {
    base_train.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }

  switch (kind) {
    case CampaignKind::kParamScaling:
      for (const auto& m : models) {
        const auto& c = m.config;
        if (c.n_heads != 4) {
          fail("param_scaling holds n_heads = 4; d_model=" + std::to_string(c.d_model) + " uses " +
               std::to_string(c.n_heads));
        }
        if (c.n_layers < 1 || !aspect_ratio(c).below(70)) {
          fail("aspect ratio d_model/n_layers must stay below 70; d_model=" + std::to_string(c.d_model) +
               " n_layers=" + std::to_string(c.n_layers));
        }
      }
      if (f_d.size() > 1) fail("param_scaling varies model size only; give at most one f_d");
      break;
    case CampaignKind::kDataScaling:
      if (models.size() != 1) fail("data_scaling holds the model fixed; give exactly one model");
      if (f_d.empty()) fail("data_scaling needs grid.f_d");
      if (lr_max.size() > 1) fail("data_scaling varies f_d only; give at most one lr_max");
      break;
    case CampaignKind::kLrSweep:
      if (lr_max.size() < 2) fail("lr_sweep needs at least two grid.lr_max values");
      if (f_d.size() > 1) fail("lr_sweep takes at most one f_d");
      break;
    case CampaignKind::kArchSweep:
      if (f_d.size() > 1) fail("arch_sweep takes at most one f_d");
      break;
  }
}

namespace {

std::vector<double> double_list(const YAML::Node& node, const std::string& what) {
  std::vector<double> out;
  if (!node) return out;
  if (!node.IsSequence()) throw UsageError(what + " must be a list");
  for (const auto& v : node) out.push_back(v.as<double>());
  return out;
}

}  // namespace

ExperimentPlan parse_plan(const std::string& text) {
  YAML::Node root = load_yaml(text, "plan");
  if (!root.IsMap()) throw UsageError("plan must be a mapping");
  ExperimentPlan plan;
  try {
    if (root["format"] && root["format"].as<std::string>() != "ltm-plan/1") {
      throw UsageError("unsupported plan format " + root["format"].as<std::string>());
    }
    if (!root["kind"]) throw UsageError("plan needs a 'kind'");
    plan.kind = parse_campaign_kind(root["kind"].as<std::string>());
    // lr_sweep and arch_sweep record divergence as data rather than retrying.
    if (plan.kind == CampaignKind::kLrSweep || plan.kind == CampaignKind::kArchSweep) plan.backoff_retries = 0;
    if (root["name"]) plan.name = root["name"].as<std::string>();
    if (root["seed"]) plan.seed = root["seed"].as<std::uint64_t>();
    if (root["corpus"]) plan.corpus = root["corpus"].as<std::string>();
    if (root["seed_policy"]) plan.seed_policy = root["seed_policy"].as<std::string>();
    if (auto b = root["backoff"]) {
      if (b["retries"]) plan.backoff_retries = b["retries"].as<int>();
      if (b["factor"]) plan.backoff_factor = b["factor"].as<double>();
    }
    apply_model(root["model"], plan.base_model);
    apply_train(root["train"], plan.base_train);
    auto grid = root["grid"];
    if (!grid || !grid.IsMap()) throw UsageError("plan needs a 'grid' mapping");
    for (const auto& kv : grid) {
      const auto key = kv.first.as<std::string>();
      if (key != "models" && key != "lr_max" && key != "f_d") throw UsageError("unknown grid axis '" + key + "'");
    }
    if (auto models = grid["models"]) {
      if (!models.IsSequence()) throw UsageError("grid.models must be a list");
      for (const auto& node : models) {
        ModelEntry entry{plan.base_model, std::nullopt};
        apply_model(node, entry.config);
        if (node["lr_max"]) entry.lr_max = node["lr_max"].as<double>();
        plan.models.push_back(entry);
      }
    } else {
      plan.models.push_back({plan.base_model, std::nullopt});
    }
    plan.lr_max = double_list(grid["lr_max"], "grid.lr_max");
    plan.f_d = double_list(grid["f_d"], "grid.f_d");
  } catch (const YAML::Exception& e) {
    throw UsageError(std::string("bad value in plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

ExperimentPlan load_plan(const fs::path& path) { return parse_plan(read_text(path)); }

std::vector<Cell> expand_cells(const ExperimentPlan& plan) {
  std::vector<Cell> cells;
  for (const auto& m : plan.models) {
    std::vector<double> lrs = plan.lr_max;
    if (lrs.empty()) lrs.push_back(m.lr_max.value_or(plan.base_train.lr_max));
    std::vector<double> fds = plan.f_d;
    if (fds.empty()) fds.push_back(plan.base_train.f_d);
    for (double lr : lrs) {
      for (double fd : fds) {
        Cell c;
        c.model = m.config;
        c.train = plan.base_train;
        c.train.lr_max = lr;
        c.train.f_d = fd;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%03zu-d%d-h%d-l%d-lr%.4g-fd%.4g", cells.size(), c.model.d_model,
                      c.model.n_heads, c.model.n_layers, lr, fd);
        c.id = buf;
        c.seed = plan.seed_policy == "shared" ? derive_seed(plan.seed, "shared") : derive_seed(plan.seed, c.id);
        c.train.seed = c.seed;
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

namespace {

nlohmann::ordered_json num(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nullptr; }
double num_or_nan(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

}  // namespace

std::string index_json(const CampaignIndex& index) {
  nlohmann::ordered_json j;
  j["format"] = "ltm-campaign/1";
  j["name"] = index.name;
  j["kind"] = to_string(index.kind);
  j["seed"] = index.seed;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : index.cells) {
    nlohmann::ordered_json e;
    e["id"] = c.id;
    e["dir"] = c.dir;
    e["d_model"] = c.model.d_model;
    e["n_heads"] = c.model.n_heads;
    e["n_layers"] = c.model.n_layers;
    e["seq_len"] = c.model.seq_len;
    e["pre_layer_norm"] = c.model.pre_layer_norm;
    e["n_params"] = c.n_params;
    e["lr_max"] = c.lr_max;
    e["lr_used"] = c.lr_used;
    e["f_d"] = c.f_d;
    e["seed"] = c.seed;
    e["attempts"] = c.attempts;
    e["status"] = c.status;
    e["min_mse"] = num(c.min_metrics.mse);
    e["min_crps"] = num(c.min_metrics.crps);
    e["min_nll"] = num(c.min_metrics.nll);
    e["min_loglik"] = num(c.min_metrics.reported_loglik());
    e["final_compute"] = compute_to_string(c.final_compute);
    e["data_points"] = c.data_points;
    e["selected"] = c.selected;
    j["cells"].push_back(e);
  }
  return j.dump(2) + "\n";
}

CampaignIndex parse_index_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("campaign index is not valid JSON: ") + e.what());
  }
  CampaignIndex index;
  index.name = j.at("name").get<std::string>();
  index.kind = parse_campaign_kind(j.at("kind").get<std::string>());
  index.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("cells")) {
    CellRecord c;
    c.id = e.at("id").get<std::string>();
    c.dir = e.at("dir").get<std::string>();
    c.model.d_model = e.at("d_model").get<int>();
    c.model.n_heads = e.at("n_heads").get<int>();
    c.model.n_layers = e.at("n_layers").get<int>();
    c.model.seq_len = e.at("seq_len").get<int>();
    c.model.pre_layer_norm = e.at("pre_layer_norm").get<bool>();
    c.n_params = e.at("n_params").get<std::uint64_t>();
    c.lr_max = e.at("lr_max").get<double>();
    c.lr_used = e.at("lr_used").get<double>();
    c.f_d = e.at("f_d").get<double>();
    c.seed = e.at("seed").get<std::uint64_t>();
    c.attempts = e.at("attempts").get<int>();
    c.status = e.at("status").get<std::string>();
    c.min_metrics = {num_or_nan(e.at("min_mse")), num_or_nan(e.at("min_crps")), num_or_nan(e.at("min_nll"))};
    c.final_compute = parse_compute(e.at("final_compute").get<std::string>());
    c.data_points = e.at("data_points").get<std::uint64_t>();
    c.selected = e.at("selected").get<bool>();
    index.cells.push_back(std::move(c));
  }
  return index;
}

CampaignIndex load_index(const fs::path& campaign_dir) {
  if (!fs::is_directory(campaign_dir)) throw UsageError("campaign directory " + campaign_dir.string() + " not found");
  const auto path = campaign_dir / "index.json";
  if (!fs::exists(path)) throw UsageError("no index.json in " + campaign_dir.string());
  return parse_index_json(read_text(path));
}

std::vector<std::size_t> select_best_lr(std::vector<CellRecord>& cells) {
  std::map<std::uint64_t, std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].selected = false;
    const auto& c = cells[i];
    if (c.status != "COMPLETED" && c.status != "EARLY_STOPPED") continue;
    if (!std::isfinite(c.min_metrics.crps)) continue;
    auto it = best.find(c.n_params);
    if (it == best.end() || c.min_metrics.crps < cells[it->second].min_metrics.crps) best[c.n_params] = i;
  }
  std::vector<std::size_t> out;
  for (const auto& [n, i] : best) {
    cells[i].selected = true;
    out.push_back(i);
  }
  return out;
}

namespace {

struct Job {
  std::size_t cell = 0;
  double lr = 0.0;
};

fs::path self_executable() {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  if (ec) throw std::runtime_error("cannot locate the ltm executable for parallel runs");
  return p;
}

pid_t spawn_train(const fs::path& exe, const fs::path& config, const fs::path& run_dir) {
  std::vector<std::string> args = {exe.string(), "train", config.string(), "--out", run_dir.string(), "--quiet"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
    throw std::runtime_error("failed to start a training process");
  }
  return pid;
}

}  // namespace

CampaignIndex run_campaign(const ExperimentPlan& plan, const fs::path& plan_dir, const fs::path& out_dir, int parallel,
                           std::ostream* log) {
  plan.validate();
  const auto corpus = fs::absolute(resolve_corpus(plan.corpus, plan_dir));
  const auto cells = expand_cells(plan);
  fs::create_directories(out_dir / "cells");

  CampaignIndex index;
  index.name = plan.name;
  index.kind = plan.kind;
  index.seed = plan.seed;
  for (const auto& c : cells) {
    CellRecord r;
    r.id = c.id;
    r.dir = "cells/" + c.id;
    r.model = c.model;
    r.n_params = count_parameters(c.model);
    r.lr_max = c.train.lr_max;
    r.lr_used = c.train.lr_max;
    r.f_d = c.train.f_d;
    r.seed = c.seed;
    r.status = "FAILED";
    index.cells.push_back(r);
  }

  auto write_spec = [&](const Job& job) {
    const auto& c = cells[job.cell];
    RunSpec spec;
    spec.corpus = corpus.string();
    spec.model = c.model;
    spec.train = c.train;
    spec.train.lr_max = job.lr;
    spec.model_seed = derive_seed(c.seed, "model");
    const auto dir = out_dir / index.cells[job.cell].dir;
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_text(dir / "cell.yaml", emit_run_spec(spec));
    return spec;
  };

  // Returns true when the cell should be retried at a lower learning rate.
  auto record = [&](const Job& job) {
    auto& r = index.cells[job.cell];
    r.attempts += 1;
    r.lr_used = job.lr;
    const auto summary_path = out_dir / r.dir / "summary.json";
    if (!fs::exists(summary_path)) {
      r.status = "FAILED";
      return false;
    }
    auto s = parse_summary_json(read_text(summary_path));
    r.status = s.status;
    r.min_metrics = s.min_metrics;
    r.final_compute = s.final_compute;
    r.data_points = s.data_points;
    if (log) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%-40s %-13s lr=%.4g  min crps=%.5f nll=%.5f\n", r.id.c_str(),
                    r.status.c_str(), job.lr, r.min_metrics.crps, r.min_metrics.nll);
      *log << buf << std::flush;
    }
    return s.status == "DIVERGED" && r.attempts <= plan.backoff_retries;
  };

  std::deque<Job> queue;
  for (std::size_t i = 0; i < cells.size(); ++i) queue.push_back({i, cells[i].train.lr_max});

  if (parallel <= 1) {
    while (!queue.empty()) {
      Job job = queue.front();
      queue.pop_front();
      auto spec = write_spec(job);
      try {
        execute_run(spec, {}, out_dir / index.cells[job.cell].dir, nullptr);
      } catch (const std::exception& e) {
        if (log) *log << index.cells[job.cell].id << ": " << e.what() << "\n";
      }
      if (record(job)) queue.push_front({job.cell, job.lr * plan.backoff_factor});
    }
  } else {
    const auto exe = self_executable();
    std::map<pid_t, Job> running;
    while (!queue.empty() || !running.empty()) {
      while (!queue.empty() && static_cast<int>(running.size()) < parallel) {
        Job job = queue.front();
        queue.pop_front();
        write_spec(job);
        const auto dir = out_dir / index.cells[job.cell].dir;
        running[spawn_train(exe, dir / "cell.yaml", dir)] = job;
      }
      int status = 0;
      pid_t pid = waitpid(-1, &status, 0);
      if (pid < 0) break;
      auto it = running.find(pid);
      if (it == running.end()) continue;
      Job job = it->second;
      running.erase(it);
      if (record(job)) queue.push_back({job.cell, job.lr * plan.backoff_factor});
    }
  }

  if (plan.kind == CampaignKind::kLrSweep) select_best_lr(index.cells);
  write_text(out_dir / "index.json", index_json(index));
  return index;
}

FitAxis parse_fit_axis(const std::string& text) {
  if (text == "params") return FitAxis::kParams;
  if (text == "compute") return FitAxis::kCompute;
  if (text == "data") return FitAxis::kData;
  if (text == "lr") return FitAxis::kLr;
  throw UsageError("unknown axis '" + text + "' (params, compute, data, lr)");
}

std::string to_string(FitAxis a) {
  switch (a) {
    case FitAxis::kParams:
      return "params";
    case FitAxis::kCompute:
      return "compute";
    case FitAxis::kData:
      return "data";
    case FitAxis::kLr:
      return "lr";
  }
  return "unknown";
}

std::vector<FitPoint> fit_points(const fs::path& campaign_dir, const CampaignIndex& index, FitAxis axis, Metric metric) {
  auto usable = [](const CellRecord& c) { return c.status == "COMPLETED" || c.status == "EARLY_STOPPED"; };
  std::vector<FitPoint> points;
  if (axis == FitAxis::kCompute) {
    std::vector<std::vector<std::pair<Compute, double>>> runs;
    for (const auto& c : index.cells) {
      if (!usable(c)) continue;
      std::vector<std::pair<Compute, double>> run;
      for (const auto& e : read_run_log(campaign_dir / c.dir / "log.jsonl")) {
        run.emplace_back(e.compute, metric_value(e, metric));
      }
      runs.push_back(std::move(run));
    }
    if (runs.empty()) return points;
    for (const auto& f : compute_frontier(runs)) points.push_back({compute_to_double(f.compute), f.loss, 1.0});
    return points;
  }
  if (axis == FitAxis::kLr) {
    std::vector<CellRecord> cells = index.cells;
    for (std::size_t i : select_best_lr(cells)) {
      points.push_back({static_cast<double>(cells[i].n_params), cells[i].lr_used, 1.0});
    }
    return points;
  }
  std::map<double, double> best;  // abscissa -> min loss
  for (const auto& c : index.cells) {
    if (!usable(c)) continue;
    auto log = read_run_log(campaign_dir / c.dir / "log.jsonl");
    if (log.empty()) continue;
    const double loss = min_loss_per_run(log, metric);
    const double x = axis == FitAxis::kParams ? static_cast<double>(c.n_params) : static_cast<double>(c.data_points);
    auto it = best.find(x);
    if (it == best.end() || loss < it->second) best[x] = loss;
  }
  for (const auto& [x, y] : best) points.push_back({x, y, 1.0});
  return points;
}

}  // namespace ltm::cli

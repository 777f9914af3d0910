#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltm/forecast.hpp"
#include "ltm/metrics.hpp"
#include "ltm/model.hpp"
#include "ltm/runlog.hpp"
#include "ltm/scaling.hpp"
#include "ltm/schedule.hpp"

namespace ltm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad input from the user: malformed files, invalid plans, missing paths. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- single runs ----------------------------------------------------------------------------

/// Everything one training run needs. Stored as YAML (format ltm-config/1).
struct RunSpec {
  std::string corpus;  // cache file path, or a cache name looked up under cache_root()
  ModelConfig model;
  TrainConfig train;
  std::uint64_t model_seed = 0;
};

RunSpec parse_run_spec(const std::string& yaml_text);
RunSpec load_run_spec(const std::filesystem::path& path);
/// Writes every field, so defaults are visible and editable.
std::string emit_run_spec(const RunSpec& spec);

/// Existing file (absolute or relative to base_dir) wins; otherwise cache_root()/<name>.ltmc.
std::filesystem::path resolve_corpus(const std::string& corpus, const std::filesystem::path& base_dir);

struct RunSummary {
  std::string run_id;
  std::string status;  // COMPLETED, EARLY_STOPPED, DIVERGED
  std::string config_hash;
  std::string note;
  std::uint64_t n_params = 0;
  std::uint64_t data_points = 0;
  int steps_run = 0;
  int best_step = 0;
  double lr_max = 0.0;
  double f_d = 1.0;
  ScoreTriple min_metrics;
  ScoreTriple best;
  Compute final_compute = 0;
};

std::string summary_json(const RunSummary& s);
RunSummary parse_summary_json(const std::string& text);

/// Trains one run and fills run_dir with config.yaml, log.jsonl, best.ckpt and summary.json.
RunSummary execute_run(const RunSpec& spec, const std::filesystem::path& base_dir,
                       const std::filesystem::path& run_dir, std::ostream* progress);

// ---- campaigns ------------------------------------------------------------------------------

enum class CampaignKind { kParamScaling, kDataScaling, kLrSweep, kArchSweep };
std::string to_string(CampaignKind k);
CampaignKind parse_campaign_kind(const std::string& text);

struct ModelEntry {
  ModelConfig config;
  std::optional<double> lr_max;  // per-size learning rate, e.g. from a fitted optimum
};

struct ExperimentPlan {
  CampaignKind kind = CampaignKind::kParamScaling;
  std::string name = "campaign";
  std::uint64_t seed = 0;
  std::string corpus;
  /// "per_cell": seed = hash(root, cell id). "shared": every cell gets the same seed, which
  /// gives common random numbers (same init stream, batches, eval windows) across cells.
  std::string seed_policy = "per_cell";
  int backoff_retries = 4;
  double backoff_factor = 0.8;
  ModelConfig base_model;
  TrainConfig base_train;
  std::vector<ModelEntry> models;
  std::vector<double> lr_max;
  std::vector<double> f_d;

  /// Throws UsageError describing the first violated rule.
  void validate() const;
};

ExperimentPlan parse_plan(const std::string& yaml_text);
ExperimentPlan load_plan(const std::filesystem::path& path);

struct Cell {
  std::string id;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
};

/// Cartesian product models x lr_max x f_d in that nesting order.
std::vector<Cell> expand_cells(const ExperimentPlan& plan);

struct CellRecord {
  std::string id;
  std::string dir;  // relative to the campaign directory
  ModelConfig model;
  std::uint64_t n_params = 0;
  double lr_max = 0.0;   // requested
  double lr_used = 0.0;  // after divergence backoff
  double f_d = 1.0;
  std::uint64_t seed = 0;
  int attempts = 0;
  std::string status;  // RunStatus text, or FAILED when no summary was produced
  ScoreTriple min_metrics;
  Compute final_compute = 0;
  std::uint64_t data_points = 0;
  bool selected = false;
};

struct CampaignIndex {
  std::string name;
  CampaignKind kind = CampaignKind::kParamScaling;
  std::uint64_t seed = 0;
  std::vector<CellRecord> cells;
};

std::string index_json(const CampaignIndex& index);
CampaignIndex parse_index_json(const std::string& text);
CampaignIndex load_index(const std::filesystem::path& campaign_dir);

/// Best lr_max per parameter count by minimum CRPS; DIVERGED and FAILED cells never win.
/// Marks the winners' `selected` flag and returns their positions.
std::vector<std::size_t> select_best_lr(std::vector<CellRecord>& cells);

/// Runs every cell (n at a time as `ltm train` subprocesses when parallel > 1, in-process
/// otherwise), retries diverged cells at lr * backoff_factor, and writes index.json.
CampaignIndex run_campaign(const ExperimentPlan& plan, const std::filesystem::path& plan_dir,
                           const std::filesystem::path& out_dir, int parallel, std::ostream* log);

// ---- fitting --------------------------------------------------------------------------------

enum class FitAxis { kParams, kCompute, kData, kLr };
FitAxis parse_fit_axis(const std::string& text);
std::string to_string(FitAxis a);

/// (A, min loss) per the axis rules; non-completed cells are skipped (diverged runs never enter).
std::vector<FitPoint> fit_points(const std::filesystem::path& campaign_dir, const CampaignIndex& index, FitAxis axis,
                                 Metric metric);

// ---- plots ----------------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;
  bool markers = false;
};

struct PlotBand {
  std::vector<double> x;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
  std::vector<PlotBand> bands;
  std::vector<double> vlines;
};

/// Standalone deterministic SVG document.
std::string render_svg(const Plot& plot);

// ---- forecasting ----------------------------------------------------------------------------

/// Standardizes the context with its own mean and standard deviation, rolls out in model
/// units and maps every trajectory back to the input scale.
Forecast forecast_series(const Model& model, std::span<const double> context, int horizon, int n_samples,
                         std::uint64_t seed);

std::string forecast_csv(const Forecast& f, int horizon, int n_samples, std::uint64_t seed);

// ---- entry point ----------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ltm::cli

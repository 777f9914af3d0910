#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ltm/metrics.hpp"
#include "ltm/model.hpp"
#include "ltm/runlog.hpp"
#include "ltm/sampler.hpp"
#include "ltm/schedule.hpp"

namespace ltm {

/// Maps a batch to per-position predictive parameters. Model-backed by default; tests
/// substitute oracles that may read the batch targets.
using PredictFn = std::function<StudentTParams(Tape&, const WindowBatch&)>;

/// Scores next-step predictions on windows drawn (t_i / T weighted, random start) until
/// they cover ceil(eval_fraction * T_test) predictions. Flat mean over positions.
ScoreTriple evaluate(const PredictFn& predict, const Corpus& test, int seq_len, double eval_fraction, Rng& rng,
                     std::size_t batch_size);
ScoreTriple evaluate(const Model& model, const Corpus& test, double eval_fraction, Rng& rng,
                     std::size_t batch_size = 64);

/// Divergence: NaN loss, or interval train NLL above this multiple of max(|initial|, 1)
/// for kDivergencePatience consecutive evaluations.
inline constexpr double kDivergenceFactor = 10.0;
inline constexpr int kDivergencePatience = 3;

struct TrainOptions {
  /// When set, log.jsonl and best.ckpt are written here as training progresses.
  std::filesystem::path run_dir;
  std::string run_id;
  std::ostream* progress = nullptr;
};

struct TrainResult {
  RunStatus status = RunStatus::kCompleted;
  std::vector<RunLogEntry> log;
  /// Parameters at the evaluation with the lowest test NLL.
  std::vector<std::vector<double>> best_params;
  int best_step = 0;
  ScoreTriple best;
  /// Minimum of each metric over all evaluations, taken independently.
  ScoreTriple min_metrics;
  int steps_run = 0;
  Compute final_compute = 0;
  std::uint64_t data_points = 0;
  double initial_train_nll = 0.0;
  std::string config_hash;
  std::string note;
};

/// Runs the full schedule (or stops early / on divergence). The model ends holding the
/// best-NLL parameters when any evaluation succeeded.
TrainResult train(Model& model, const Corpus& train_corpus, const Corpus& test_corpus, const TrainConfig& cfg,
                  const TrainOptions& options = {});

/// 16-hex-digit hash of the model and train configuration.
std::string config_hash(const ModelConfig& model, const TrainConfig& cfg);

}  // namespace ltm

#include "ltm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "ltm/adamw.hpp"
#include "ltm/checkpoint.hpp"

namespace ltm {

ScoreTriple evaluate(const PredictFn& predict, const Corpus& test, int seq_len, double eval_fraction, Rng& rng,
                     std::size_t batch_size) {
  if (test.empty()) throw std::invalid_argument("evaluate: test corpus is empty");
  if (!(eval_fraction > 0.0 && eval_fraction <= 1.0)) throw std::invalid_argument("evaluate: bad eval_fraction");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be positive");
  WindowSampler sampler(test, seq_len);
  const auto target =
      static_cast<std::uint64_t>(std::ceil(eval_fraction * static_cast<double>(sampler.total_points())));

  ScoreAccumulator acc;
  std::uint64_t covered = 0;
  std::vector<Window> windows;
  while (covered < target) {
    windows.clear();
    while (windows.size() < batch_size && covered < target) {
      windows.push_back(sampler.sample(rng));
      for (std::size_t t = 0; t + 1 < windows.back().valid.size(); ++t) {
        covered += windows.back().valid[t] && windows.back().valid[t + 1];
      }
    }
    auto batch = WindowSampler::assemble(windows, seq_len);
    if (batch.valid_count == 0) continue;
    Tape tape(Tape::Mode::kInference);
    acc.add(predict(tape, batch), batch.targets, batch.mask);
  }
  return acc.mean();
}

ScoreTriple evaluate(const Model& model, const Corpus& test, double eval_fraction, Rng& rng, std::size_t batch_size) {
  PredictFn predict = [&model](Tape& tape, const WindowBatch& batch) { return model.forward(tape, batch.inputs); };
  return evaluate(predict, test, model.config().seq_len, eval_fraction, rng, batch_size);
}

std::string config_hash(const ModelConfig& m, const TrainConfig& cfg) {
  std::string text = "d_model=" + std::to_string(m.d_model) + ";n_heads=" + std::to_string(m.n_heads) +
                     ";n_layers=" + std::to_string(m.n_layers) + ";seq_len=" + std::to_string(m.seq_len) +
                     ";theta_out=" + std::to_string(m.theta_out) +
                     ";head_hidden_layers=" + std::to_string(m.head_hidden_layers) +
                     ";pre_layer_norm=" + (m.pre_layer_norm ? "1" : "0") + ";" + cfg.canonical();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

TrainResult train(Model& model, const Corpus& train_corpus, const Corpus& test_corpus, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  const int seq_len = model.config().seq_len;
  const auto n_params = model.parameter_count();

  TrainResult result;
  result.config_hash = config_hash(model.config(), cfg);
  const std::string run_id = options.run_id.empty() ? result.config_hash.substr(0, 12) : options.run_id;

  Corpus scaled;
  const Corpus* train_set = &train_corpus;
  if (cfg.f_d < 1.0) {
    Rng scale_rng(derive_seed(cfg.seed, "scale_dataset"));
    scaled = scale_dataset(train_corpus, cfg.f_d, seq_len, scale_rng);
    train_set = &scaled;
  }
  result.data_points = total_points(*train_set);
  WindowSampler sampler(*train_set, seq_len);

  std::ofstream log_file;
  if (!options.run_dir.empty()) {
    std::filesystem::create_directories(options.run_dir);
    log_file.open(options.run_dir / "log.jsonl", std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot write run log in " + options.run_dir.string());
  }

  Rng batch_rng(derive_seed(cfg.seed, "batches"));
  AdamWState opt;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t eval_batch = cfg.eval_batch_size > 0 ? static_cast<std::size_t>(cfg.eval_batch_size) : batch_size;
  const auto start = std::chrono::steady_clock::now();

  double interval_loss = 0.0;
  int interval_steps = 0;
  double blowup_threshold = 0.0;
  int blowups = 0;
  int since_best = 0;
  int eval_index = 0;
  bool have_best = false;
  bool stop = false;

  auto diverge = [&](const std::string& why) {
    result.status = RunStatus::kDiverged;
    result.note = why;
    stop = true;
  };

  for (int step = 1; step <= cfg.total_steps && !stop; ++step) {
    const double lr = lr_at_step(cfg, step);
    for (auto& p : model.parameters()) p.value.zero_grad();
    auto batch = sampler.batch(batch_rng, batch_size);
    double loss_value = 0.0;
    try {
      Tape tape;
      auto params = model.forward(tape, batch.inputs);
      Tensor loss = nll_loss(tape, params, batch.targets, batch.mask);
      loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        diverge("non-finite training loss at step " + std::to_string(step));
        break;
      }
      backward(loss, tape);
      adamw_step(model.parameters(), opt, lr, cfg);
    } catch (const NonFiniteGradient& e) {
      diverge(std::string(e.what()) + " at step " + std::to_string(step));
      break;
    } catch (const DomainError& e) {
      diverge(std::string(e.what()) + " at step " + std::to_string(step));
      break;
    }
    if (step == 1) {
      result.initial_train_nll = loss_value;
      blowup_threshold = kDivergenceFactor * std::max(std::abs(loss_value), 1.0);
    }
    result.steps_run = step;
    interval_loss += loss_value;
    ++interval_steps;

    if (step % cfg.eval_every != 0 && step != cfg.total_steps) continue;

    RunLogEntry entry;
    entry.step = step;
    entry.lr = lr;
    entry.train_nll = interval_loss / interval_steps;
    entry.compute = compute_at_step(batch_size, n_params, static_cast<std::uint64_t>(seq_len),
                                    static_cast<std::uint64_t>(step));
    interval_loss = 0.0;
    interval_steps = 0;
    try {
      Rng eval_rng(derive_seed(cfg.seed, "eval-" + std::to_string(eval_index++)));
      auto scores = evaluate(model, test_corpus, cfg.eval_fraction, eval_rng, eval_batch);
      entry.test_mse = scores.mse;
      entry.test_crps = scores.crps;
      entry.test_nll = scores.nll;
    } catch (const DomainError& e) {
      diverge(std::string("evaluation failed: ") + e.what());
      break;
    }
    entry.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    if (log_file) log_file << to_json_line(entry, result.config_hash, run_id) << '\n' << std::flush;
    if (options.progress) {
      char buf[200];
      std::snprintf(buf, sizeof(buf), "step %6d  lr %.3e  train_nll %.4f  test mse %.4f crps %.4f nll %.4f\n", step,
                    lr, entry.train_nll, entry.test_mse, entry.test_crps, entry.test_nll);
      *options.progress << buf << std::flush;
    }

    if (!have_best) {
      result.min_metrics = {entry.test_mse, entry.test_crps, entry.test_nll};
    } else {
      result.min_metrics.mse = std::min(result.min_metrics.mse, entry.test_mse);
      result.min_metrics.crps = std::min(result.min_metrics.crps, entry.test_crps);
      result.min_metrics.nll = std::min(result.min_metrics.nll, entry.test_nll);
    }
    if (!have_best || entry.test_nll < result.best.nll) {
      have_best = true;
      result.best = {entry.test_mse, entry.test_crps, entry.test_nll};
      result.best_step = step;
      result.best_params = model.snapshot();
      since_best = 0;
      if (!options.run_dir.empty()) save_checkpoint(options.run_dir / "best.ckpt", model);
    } else {
      ++since_best;
    }

    if (!std::isfinite(entry.train_nll) || entry.train_nll > blowup_threshold) {
      if (++blowups >= kDivergencePatience) {
        diverge("train NLL above " + std::to_string(blowup_threshold) + " for " + std::to_string(blowups) +
                " consecutive evaluations");
      }
    } else {
      blowups = 0;
    }
    if (!stop && cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience && step < cfg.total_steps) {
      result.status = RunStatus::kEarlyStopped;
      result.note = "no test NLL improvement in " + std::to_string(since_best) + " evaluations";
      stop = true;
    }
  }

  result.final_compute = compute_at_step(batch_size, n_params, static_cast<std::uint64_t>(seq_len),
                                         static_cast<std::uint64_t>(result.steps_run));
  if (!result.best_params.empty()) model.restore(result.best_params);
  return result;
}

}  // namespace ltm

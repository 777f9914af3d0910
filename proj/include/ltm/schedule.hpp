#pragma once

#include <cstdint>
#include <string>

namespace ltm {

/// Training hyperparameters. Defaults follow the reference protocol: batch 512,
/// 10^5 steps, 3000 warmup steps, evaluation every 200 steps on 10% of the test data.
struct TrainConfig {
  int batch_size = 512;
  int total_steps = 100000;
  int warmup_steps = 3000;
  double lr_max = 1e-3;
  double lr_min_fraction = 0.0;
  int eval_every = 200;
  double eval_fraction = 0.10;
  int eval_batch_size = 0;  // 0 means batch_size
  int early_stop_patience = 0;  // evaluations without a new best test NLL; 0 disables
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm clip; 0 disables
  double f_d = 1.0;

  void validate() const;
  /// Canonical "key=value;..." text used for hashing and logging.
  std::string canonical() const;
};

/// Linear warmup to lr_max, then half-cosine decay to lr_min_fraction * lr_max at total_steps.
double lr_at_step(const TrainConfig& cfg, int step);

}  // namespace ltm

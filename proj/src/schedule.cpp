#include "ltm/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ltm {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid train config: " + msg); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (total_steps < 1) fail("total_steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps >= total_steps) fail("need 0 <= warmup_steps < total_steps");
  if (!(lr_max > 0.0)) fail("lr_max must be positive");
  if (!(lr_min_fraction >= 0.0 && lr_min_fraction <= 1.0)) fail("lr_min_fraction must lie in [0, 1]");
  if (eval_every < 1) fail("eval_every must be >= 1");
  if (!(eval_fraction > 0.0 && eval_fraction <= 1.0)) fail("eval_fraction must lie in (0, 1]");
  if (eval_batch_size < 0) fail("eval_batch_size must be >= 0");
  if (early_stop_patience < 0) fail("early_stop_patience must be >= 0");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (grad_clip < 0.0) fail("grad_clip must be >= 0");
  if (!(f_d > 0.0 && f_d <= 1.0)) fail("f_d must lie in (0, 1]");
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "batch_size=" << batch_size << ";total_steps=" << total_steps << ";warmup_steps=" << warmup_steps
     << ";lr_max=" << lr_max << ";lr_min_fraction=" << lr_min_fraction << ";eval_every=" << eval_every
     << ";eval_fraction=" << eval_fraction << ";eval_batch_size=" << eval_batch_size
     << ";early_stop_patience=" << early_stop_patience << ";seed=" << seed << ";weight_decay=" << weight_decay
     << ";beta1=" << beta1 << ";beta2=" << beta2 << ";adam_eps=" << adam_eps << ";grad_clip=" << grad_clip
     << ";f_d=" << f_d;
  return os.str();
}

double lr_at_step(const TrainConfig& cfg, int step) {
  if (step < 0 || step > cfg.total_steps) {
    throw std::invalid_argument("lr_at_step: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(cfg.total_steps) + "]");
  }
  if (step <= cfg.warmup_steps) {
    if (cfg.warmup_steps == 0) return cfg.lr_max;
    return cfg.lr_max * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double lr_min = cfg.lr_min_fraction * cfg.lr_max;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return lr_min + (cfg.lr_max - lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace ltm

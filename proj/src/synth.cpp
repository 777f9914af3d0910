#include "ltm/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ltm {

std::vector<std::string> synth_families() {
  return {"ar2", "ar2_cycle", "sine_mix", "random_walk", "drift_walk", "heavy_tail", "seasonal_trend",
          "regime_switch"};
}

SynthSpec SynthSpec::standard(std::uint64_t total_points) {
  SynthSpec spec;
  const auto families = synth_families();
  const std::uint64_t share = total_points / families.size();
  std::uint64_t remainder = total_points - share * families.size();
  for (const auto& family : families) {
    SynthSource src{family, family, share + (remainder ? 1 : 0)};
    if (remainder) --remainder;
    if (family == "regime_switch") {
      src.min_length = 40;
      src.max_length = 600;
    }
    spec.sources.push_back(std::move(src));
  }
  return spec;
}

std::vector<double> synth_series(const std::string& family, std::size_t length, Rng& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<double> x(length, 0.0);
  if (family == "ar2" || family == "ar2_cycle") {
    double a1 = 0.0;
    double a2 = 0.0;
    if (family == "ar2") {
      const double r1 = rng.uniform(0.3, 0.95);
      const double r2 = rng.uniform(-0.5, 0.9);
      a1 = r1 + r2;
      a2 = -r1 * r2;
    } else {
      const double radius = rng.uniform(0.85, 0.99);
      const double angle = rng.uniform(0.05, 0.8);
      a1 = 2.0 * radius * std::cos(angle);
      a2 = -radius * radius;
    }
    double p1 = 0.0;
    double p2 = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      const double v = a1 * p1 + a2 * p2 + rng.normal();
      x[t] = v;
      p2 = p1;
      p1 = v;
    }
  } else if (family == "sine_mix") {
    const auto k = 1 + rng.index(3);
    std::vector<double> period(k), phase(k), amp(k);
    for (std::size_t j = 0; j < k; ++j) {
      period[j] = rng.uniform(8.0, 200.0);
      phase[j] = rng.uniform(0.0, kTwoPi);
      amp[j] = rng.uniform(0.3, 2.0);
    }
    const double noise = rng.uniform(0.02, 0.2);
    for (std::size_t t = 0; t < length; ++t) {
      double v = 0.0;
      for (std::size_t j = 0; j < k; ++j) v += amp[j] * std::sin(kTwoPi * static_cast<double>(t) / period[j] + phase[j]);
      x[t] = v + noise * rng.normal();
    }
  } else if (family == "random_walk" || family == "drift_walk") {
    const double drift = family == "drift_walk" ? rng.uniform(-0.2, 0.2) : 0.0;
    double level = rng.normal();
    for (std::size_t t = 0; t < length; ++t) {
      level += drift + rng.normal();
      x[t] = level;
    }
  } else if (family == "heavy_tail") {
    double prev = 0.0;
    std::size_t burst = 0;
    const double scale = rng.uniform(1.0, 4.0);
    for (std::size_t t = 0; t < length; ++t) {
      if (burst == 0 && rng.uniform() < 0.02) burst = 5 + rng.index(26);
      double shock = rng.normal();
      if (burst > 0) {
        shock = scale * rng.student_t(1.5);
        --burst;
      }
      prev = 0.7 * prev + shock;
      x[t] = prev;
    }
  } else if (family == "seasonal_trend") {
    const double period = rng.uniform() < 0.5 ? 24.0 : 7.0;
    const double slope = rng.uniform(-0.01, 0.01);
    const double amp = rng.uniform(0.5, 3.0);
    const double phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t t = 0; t < length; ++t) {
      const double tt = static_cast<double>(t);
      x[t] = slope * tt + amp * std::sin(kTwoPi * tt / period + phase) + 0.3 * rng.normal();
    }
  } else if (family == "regime_switch") {
    double level = rng.normal();
    const double noise = rng.uniform(0.05, 0.5);
    for (std::size_t t = 0; t < length; ++t) {
      if (rng.uniform() < 0.03) level = 2.0 * rng.normal();
      x[t] = level + noise * rng.normal();
    }
  } else {
    throw std::invalid_argument("unknown synthetic family '" + family + "'");
  }
  return x;
}

Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  Corpus corpus;
  for (const auto& src : spec.sources) {
    if (src.min_length < 2 || src.max_length < src.min_length) {
      throw std::invalid_argument("synthetic source '" + src.label + "' has an invalid length range");
    }
    Rng rng(derive_seed(seed, src.label));
    std::uint64_t remaining = src.points;
    std::size_t index = 0;
    while (remaining > 0) {
      auto len = static_cast<std::uint64_t>(src.min_length + rng.index(src.max_length - src.min_length + 1));
      if (len > remaining) len = remaining;
      // Never leave a remainder too short to form a series; fold it into this one instead.
      if (remaining - len > 0 && remaining - len < src.min_length) len = remaining;
      if (len < 2) break;
      corpus.push_back({src.label, src.label + "-" + std::to_string(index++),
                        synth_series(src.family, static_cast<std::size_t>(len), rng)});
      remaining -= len;
    }
  }
  return corpus;
}

}  // namespace ltm

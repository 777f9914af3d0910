#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltm/series.hpp"

namespace ltm {

/// Generator families understood by synth_corpus.
///   ar2            stable AR(2) with real roots
///   ar2_cycle      AR(2) with complex roots (damped oscillation)
///   sine_mix       1-3 sinusoids with random period and phase, light noise
///   random_walk    Gaussian random walk
///   drift_walk     random walk with a per-series drift
///   heavy_tail     AR(1) baseline with Cauchy-like noise bursts
///   seasonal_trend linear trend plus daily/weekly style seasonality
///   regime_switch  piecewise-constant level shifts with noise
std::vector<std::string> synth_families();

struct SynthSource {
  std::string label;
  std::string family;
  std::uint64_t points = 0;
  std::size_t min_length = 300;
  std::size_t max_length = 3000;
};

struct SynthSpec {
  std::vector<SynthSource> sources;

  /// One source per family, equal shares of `total_points` (12.5% each).
  static SynthSpec standard(std::uint64_t total_points);
};

/// Raw (un-normalized) synthetic corpus. Each source produces exactly its requested
/// point count; series lengths are drawn from [min_length, max_length].
Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed);

/// A single series from `family`; exposed for forecast tests and tooling.
std::vector<double> synth_series(const std::string& family, std::size_t length, Rng& rng);

}  // namespace ltm

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltm/rng.hpp"

namespace ltm {

/// One univariate series tagged with the source it came from.
struct SeriesRecord {
  std::string source;
  std::string id;
  std::vector<double> values;

  std::size_t length() const { return values.size(); }
  bool operator==(const SeriesRecord&) const = default;
};

using Corpus = std::vector<SeriesRecord>;

struct SplitCorpus {
  Corpus train;
  Corpus test;
};

std::uint64_t total_points(const Corpus& corpus);

/// (x - mean) / std with the population standard deviation. Constant series map to zeros.
std::vector<double> normalize(std::span<const double> series);

void normalize_corpus(Corpus& corpus);

inline constexpr double kTestFraction = 0.05;
inline constexpr std::size_t kMinSeriesPerSource = 20;

/// Per-source split by whole series: round(5%) of each source's series go to test.
/// Deterministic in `seed`. Sources with fewer than 20 series add a warning.
SplitCorpus split(const Corpus& corpus, std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

/// Diversity-preserving subsample.
///
/// A series whose cut length ceil(f_d * t_i) still holds seq_len + 1 points keeps one
/// contiguous segment of that length at a uniform random offset. Shorter series are
/// kept whole with probability f_d and dropped otherwise.
Corpus scale_dataset(const Corpus& corpus, double f_d, int seq_len, Rng& rng);

struct SourceShare {
  std::string source;
  std::uint64_t points = 0;
  std::uint64_t series = 0;
  double fraction = 0.0;
};

struct BalanceReport {
  std::vector<SourceShare> sources;
  std::uint64_t total_points = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kBalanceLimit = 0.15;
inline constexpr double kBalanceTolerance = 0.02;

/// Exact per-source counts in first-appearance order; warns for every source above limit + tolerance.
BalanceReport balance_report(const Corpus& corpus, double limit = kBalanceLimit,
                             double tolerance = kBalanceTolerance);

}  // namespace ltm

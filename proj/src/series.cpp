#include "ltm/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace ltm {

std::uint64_t total_points(const Corpus& corpus) {
  std::uint64_t n = 0;
  for (const auto& s : corpus) n += s.length();
  return n;
}

std::vector<double> normalize(std::span<const double> series) {
  if (series.empty()) throw std::invalid_argument("normalize: empty series");
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  std::vector<double> out(series.size(), 0.0);
  // Relative threshold: a "constant" series may carry rounding noise from the mean.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return out;
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - mean) / sd;
  return out;
}

void normalize_corpus(Corpus& corpus) {
  for (auto& s : corpus) s.values = normalize(s.values);
}

SplitCorpus split(const Corpus& corpus, std::uint64_t seed, std::vector<std::string>* warnings) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = by_source.try_emplace(corpus[i].source);
    if (inserted) order.push_back(corpus[i].source);
    it->second.push_back(i);
  }

  std::vector<char> is_test(corpus.size(), 0);
  for (const auto& source : order) {
    auto members = by_source[source];
    if (warnings && members.size() < kMinSeriesPerSource) {
      warnings->push_back("source '" + source + "' has only " + std::to_string(members.size()) +
                          " series; a 95/5 split by whole series is coarse");
    }
    Rng rng(derive_seed(seed, source));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    auto n_test = static_cast<std::size_t>(std::llround(kTestFraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < n_test; ++i) is_test[members[i]] = 1;
  }

  SplitCorpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) (is_test[i] ? out.test : out.train).push_back(corpus[i]);
  return out;
}

Corpus scale_dataset(const Corpus& corpus, double f_d, int seq_len, Rng& rng) {
  if (!(f_d > 0.0 && f_d <= 1.0)) throw std::invalid_argument("scale_dataset: f_d must lie in (0, 1]");
  if (seq_len < 1) throw std::invalid_argument("scale_dataset: seq_len must be positive");
  const auto needed = static_cast<std::size_t>(seq_len) + 1;
  Corpus out;
  for (const auto& s : corpus) {
    const auto cut = static_cast<std::size_t>(std::ceil(f_d * static_cast<double>(s.length())));
    if (cut >= needed) {
      const std::size_t offset = cut == s.length() ? 0 : rng.index(s.length() - cut + 1);
      SeriesRecord kept{s.source, s.id, {}};
      kept.values.assign(s.values.begin() + static_cast<std::ptrdiff_t>(offset),
                         s.values.begin() + static_cast<std::ptrdiff_t>(offset + cut));
      out.push_back(std::move(kept));
    } else if (f_d >= 1.0 || rng.uniform() < f_d) {
      out.push_back(s);
    }
  }
  return out;
}

BalanceReport balance_report(const Corpus& corpus, double limit, double tolerance) {
  BalanceReport report;
  std::map<std::string, std::size_t> index;
  for (const auto& s : corpus) {
    auto [it, inserted] = index.try_emplace(s.source, report.sources.size());
    if (inserted) report.sources.push_back({s.source, 0, 0, 0.0});
    auto& share = report.sources[it->second];
    share.points += s.length();
    share.series += 1;
    report.total_points += s.length();
  }
  for (auto& share : report.sources) {
    share.fraction = report.total_points
                         ? static_cast<double>(share.points) / static_cast<double>(report.total_points)
                         : 0.0;
    if (share.fraction > limit + tolerance) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%.1f%% of data points (limit %.0f%%)", 100.0 * share.fraction, 100.0 * limit);
      report.warnings.push_back("source '" + share.source + "' holds " + buf);
    }
  }
  return report;
}

}  // namespace ltm

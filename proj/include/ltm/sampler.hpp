#pragma once

#include <span>
#include <vector>

#include "ltm/series.hpp"
#include "ltm/tensor.hpp"

namespace ltm {

/// A window of seq_len + 1 consecutive values; `valid` is 0 on left padding.
struct Window {
  std::size_t series = 0;
  std::size_t start = 0;
  std::vector<double> values;
  std::vector<unsigned char> valid;
};

/// Next-step training pairs: targets[b, t] = window[b, t + 1]. mask[b, t] is 1 where both
/// the input and its target are real data points.
struct WindowBatch {
  Tensor inputs;
  Tensor targets;
  Tensor mask;
  std::size_t valid_count = 0;
};

/// Draws series i with probability t_i / T, then a uniform start offset on every visit.
///
/// Holds a reference to the corpus, which must outlive the sampler.
class WindowSampler {
 public:
  WindowSampler(const Corpus& corpus, int seq_len);

  std::size_t pick_series(Rng& rng) const;
  Window sample(Rng& rng) const;
  /// Window of series `index` starting at `start` (or left-padded when the series is short).
  Window window_at(std::size_t index, std::size_t start) const;
  WindowBatch batch(Rng& rng, std::size_t batch_size) const;

  std::uint64_t total_points() const { return cumulative_.back(); }
  int seq_len() const { return seq_len_; }
  const Corpus& corpus() const { return *corpus_; }

  static WindowBatch assemble(std::span<const Window> windows, int seq_len);

 private:
  const Corpus* corpus_;
  int seq_len_;
  std::vector<std::uint64_t> cumulative_;
};

}  // namespace ltm

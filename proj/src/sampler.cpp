#include "ltm/sampler.hpp"

#include <algorithm>
#include <stdexcept>

namespace ltm {

WindowSampler::WindowSampler(const Corpus& corpus, int seq_len) : corpus_(&corpus), seq_len_(seq_len) {
  if (seq_len < 1) throw std::invalid_argument("sampler: seq_len must be positive");
  if (corpus.empty()) throw std::invalid_argument("sampler: corpus is empty");
  cumulative_.reserve(corpus.size());
  std::uint64_t running = 0;
  for (const auto& s : corpus) {
    running += s.length();
    cumulative_.push_back(running);
  }
  if (running == 0) throw std::invalid_argument("sampler: corpus holds no data points");
}

std::size_t WindowSampler::pick_series(Rng& rng) const {
  const std::uint64_t point = rng.index(cumulative_.back());
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), point);
  return static_cast<std::size_t>(it - cumulative_.begin());
}

Window WindowSampler::window_at(std::size_t index, std::size_t start) const {
  const auto& values = (*corpus_)[index].values;
  const auto span = static_cast<std::size_t>(seq_len_) + 1;
  Window w;
  w.series = index;
  if (values.size() >= span) {
    if (start > values.size() - span) throw std::out_of_range("sampler: window start past end of series");
    w.start = start;
    w.values.assign(values.begin() + static_cast<std::ptrdiff_t>(start),
                    values.begin() + static_cast<std::ptrdiff_t>(start + span));
    w.valid.assign(span, 1);
  } else {
    const std::size_t pad = span - values.size();
    w.values.assign(pad, 0.0);
    w.values.insert(w.values.end(), values.begin(), values.end());
    w.valid.assign(pad, 0);
    w.valid.resize(span, 1);
  }
  return w;
}

Window WindowSampler::sample(Rng& rng) const {
  const std::size_t index = pick_series(rng);
  const auto len = (*corpus_)[index].length();
  const auto span = static_cast<std::size_t>(seq_len_) + 1;
  const std::size_t start = len >= span ? rng.index(len - span + 1) : 0;
  return window_at(index, start);
}

WindowBatch WindowSampler::assemble(std::span<const Window> windows, int seq_len) {
  const auto len = static_cast<std::size_t>(seq_len);
  const std::size_t rows = windows.size();
  std::vector<double> inputs(rows * len);
  std::vector<double> targets(rows * len);
  std::vector<double> mask(rows * len);
  std::size_t valid = 0;
  for (std::size_t b = 0; b < rows; ++b) {
    const auto& w = windows[b];
    for (std::size_t t = 0; t < len; ++t) {
      inputs[b * len + t] = w.values[t];
      targets[b * len + t] = w.values[t + 1];
      const bool ok = w.valid[t] && w.valid[t + 1];
      mask[b * len + t] = ok ? 1.0 : 0.0;
      valid += ok;
    }
  }
  WindowBatch batch;
  batch.inputs = Tensor({rows, len}, std::move(inputs));
  batch.targets = Tensor({rows, len}, std::move(targets));
  batch.mask = Tensor({rows, len}, std::move(mask));
  batch.valid_count = valid;
  return batch;
}

WindowBatch WindowSampler::batch(Rng& rng, std::size_t batch_size) const {
  std::vector<Window> windows;
  windows.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) windows.push_back(sample(rng));
  return assemble(windows, seq_len_);
}

}  // namespace ltm

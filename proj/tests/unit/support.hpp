#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ltm/model.hpp"
#include "ltm/rng.hpp"
#include "ltm/tensor.hpp"

namespace ltm::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

/// Zero-initialized biases put ReLU inputs exactly on the kink wherever the previous layer
/// is dead; a gradient check needs a generic point, so give every bias a small random value.
inline void jitter_biases(Model& model, Rng& rng, double scale = 0.1) {
  for (auto& p : model.parameters()) {
    if (p.name.ends_with(".bias")) {
      for (double& v : p.value.mutable_data()) v = rng.uniform(-scale, scale);
    }
  }
}

/// Step sizes for whole-model checks; see finite_diff_check_multiscale.
inline constexpr double kModelCheckSteps[] = {1e-3, 1e-4, 1e-5, 1e-6};

inline std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ltm-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ltm::test

#include "ltm/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace ltm::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using Strided = Eigen::OuterStride<>;
using StridedMap = Eigen::Map<RowMat, 0, Strided>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Strided>;

ConstMatMap as_matrix(std::span<const double> data, std::size_t rows, std::size_t cols) {
  return ConstMatMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(std::span<double> data, std::size_t rows, std::size_t cols) {
  return MatMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Builds an output tensor and tapes its backward rule when any input needs a gradient.
template <typename Rule>
Tensor finish(Tape& tape, Shape shape, Buffer data, std::initializer_list<const Tensor*> inputs,
              Rule&& rule) {
  Tensor out = Tensor::from_buffer(std::move(shape), std::move(data));
  if (tape.wants(inputs)) {
    tape.record(out, [out_ref = out, rule = std::forward<Rule>(rule)]() mutable {
      if (!out_ref.has_grad()) return;
      rule(out_ref.grad());
    });
  } else {
    tape.adopt(out);
  }
  return out;
}

template <typename F>
Tensor unary(Tape& tape, const Tensor& x, F&& value_and_slope) {
  auto in = x.data();
  Buffer out(in.size());
  Buffer slope(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [v, s] = value_and_slope(in[i]);
    out[i] = v;
    slope[i] = s;
  }
  return finish(tape, x.shape(), std::move(out), {&x},
                [x, slope = std::move(slope)](std::span<const double> g) mutable {
                  auto gx = x.mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * slope[i];
                });
}

}  // namespace

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || b.rank() != 1 || x.dim(-1) != w.dim(0) || b.dim(0) != w.dim(1)) {
    throw ShapeError("linear: incompatible shapes x=" + shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                     " b=" + shape_str(b.shape()));
  }
  const std::size_t in_dim = w.dim(0);
  const std::size_t out_dim = w.dim(1);
  const std::size_t rows = x.size() / in_dim;

  Buffer out(rows * out_dim);
  auto y = as_matrix(std::span<double>(out), rows, out_dim);
  auto xm = as_matrix(x.data(), rows, in_dim);
  auto wm = as_matrix(w.data(), in_dim, out_dim);
  y.noalias() = xm * wm;
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), static_cast<Eigen::Index>(out_dim));

  Shape shape = x.shape();
  shape.back() = out_dim;
  return finish(tape, std::move(shape), std::move(out), {&x, &w, &b},
                [x, w, b, rows, in_dim, out_dim](std::span<const double> g) mutable {
                  auto gy = as_matrix(g, rows, out_dim);
                  if (x.requires_grad()) {
                    auto gx = as_matrix(x.mutable_grad(), rows, in_dim);
                    gx.noalias() += gy * as_matrix(w.data(), in_dim, out_dim).transpose();
                  }
                  if (w.requires_grad()) {
                    auto gw = as_matrix(w.mutable_grad(), in_dim, out_dim);
                    gw.noalias() += as_matrix(x.data(), rows, in_dim).transpose() * gy;
                  }
                  if (b.requires_grad()) {
                    Eigen::Map<Eigen::RowVectorXd> gb(b.mutable_grad().data(), static_cast<Eigen::Index>(out_dim));
                    gb += gy.colwise().sum();
                  }
                });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(tape, x, [](double v) { return std::pair{v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0}; });
}

Tensor softplus(Tape& tape, const Tensor& x) {
  return unary(tape, x, [](double v) {
    double value = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    double sigmoid = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::pair{value, sigmoid};
  });
}

Tensor add_scalar(Tape& tape, const Tensor& x, double c) {
  return unary(tape, x, [c](double v) { return std::pair{v + c, 1.0}; });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool suffix = sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  if (!suffix) {
    throw ShapeError("add: shape " + shape_str(sb) + " does not broadcast onto " + shape_str(sa));
  }
  const std::size_t inner = b.size();
  const std::size_t outer = a.size() / inner;
  auto ad = a.data();
  auto bd = b.data();
  Buffer out(a.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = ad[o * inner + i] + bd[i];
  }
  return finish(tape, sa, std::move(out), {&a, &b}, [a, b, inner, outer](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) gb[i] += g[o * inner + i];
      }
    }
  });
}

void softmax_row(double* row, std::size_t len, std::size_t stride) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < len; ++j) peak = std::max(peak, row[j * stride]);
  double total = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    double e = std::exp(row[j * stride] - peak);
    row[j * stride] = e;
    total += e;
  }
  for (std::size_t j = 0; j < len; ++j) row[j * stride] /= total;
}

Tensor softmax(Tape& tape, const Tensor& x, int axis) {
  const auto& s = x.shape();
  int r = static_cast<int>(s.size());
  int ax = axis < 0 ? axis + r : axis;
  if (ax < 0 || ax >= r) throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t len = s[static_cast<std::size_t>(ax)];
  std::size_t inner = 1;
  for (std::size_t i = static_cast<std::size_t>(ax) + 1; i < s.size(); ++i) inner *= s[i];
  std::size_t outer = x.size() / (len * inner);

  Buffer out(x.data().begin(), x.data().end());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) softmax_row(out.data() + o * len * inner + i, len, inner);
  }
  Buffer probs = out;
  return finish(tape, s, std::move(out), {&x},
                [x, probs = std::move(probs), len, inner, outer](std::span<const double> g) mutable {
                  auto gx = x.mutable_grad();
                  for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t i = 0; i < inner; ++i) {
                      std::size_t base = o * len * inner + i;
                      double dot = 0.0;
                      for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * probs[base + j * inner];
                      for (std::size_t j = 0; j < len; ++j) {
                        std::size_t idx = base + j * inner;
                        gx[idx] += probs[idx] * (g[idx] - dot);
                      }
                    }
                  }
                });
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.dim(-1);
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: x=" + shape_str(x.shape()) + " gain=" + shape_str(gain.shape()) +
                     " bias=" + shape_str(bias.shape()));
  }
  const std::size_t rows = x.size() / d;
  auto in = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  Buffer out(x.size());
  Buffer xhat(x.size());
  Buffer inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      double h = (row[j] - mu) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = gd[j] * h + bd[j];
    }
  }
  return finish(tape, x.shape(), std::move(out), {&x, &gain, &bias},
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                 d](std::span<const double> g) mutable {
                  auto gd = gain.data();
                  if (gain.requires_grad()) {
                    auto gg = gain.mutable_grad();
                    for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
                  }
                  if (bias.requires_grad()) {
                    auto gb = bias.mutable_grad();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                  }
                  if (!x.requires_grad()) return;
                  auto gx = x.mutable_grad();
                  const double n = static_cast<double>(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_g = 0.0;
                    double mean_gx = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      double gh = g[r * d + j] * gd[j];
                      mean_g += gh;
                      mean_gx += gh * xhat[r * d + j];
                    }
                    mean_g /= n;
                    mean_gx /= n;
                    for (std::size_t j = 0; j < d; ++j) {
                      double gh = g[r * d + j] * gd[j];
                      gx[r * d + j] += inv_std[r] * (gh - mean_g - xhat[r * d + j] * mean_gx);
                    }
                  }
                });
}

Tensor multi_head_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_heads,
                            bool causal) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("attention: q=" + shape_str(q.shape()) + " k=" + shape_str(k.shape()) +
                     " v=" + shape_str(v.shape()));
  }
  const std::size_t batch = q.dim(0);
  const std::size_t seq = q.dim(1);
  const std::size_t d = q.dim(2);
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError("attention: width " + std::to_string(d) + " not divisible into " + std::to_string(n_heads) +
                     " heads");
  }
  const std::size_t dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto L = static_cast<Eigen::Index>(seq);
  const auto H = static_cast<Eigen::Index>(dh);
  const Strided stride(static_cast<Eigen::Index>(d));

  Buffer out(q.size(), 0.0);
  Buffer probs(batch * n_heads * seq * seq, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      std::size_t off = b * seq * d + h * dh;
      ConstStridedMap qh(q.data().data() + off, L, H, stride);
      ConstStridedMap kh(k.data().data() + off, L, H, stride);
      ConstStridedMap vh(v.data().data() + off, L, H, stride);
      MatMap p(probs.data() + (b * n_heads + h) * seq * seq, L, L);
      p.noalias() = (qh * kh.transpose()) * scale;
      for (std::size_t i = 0; i < seq; ++i) {
        double* row = p.data() + i * seq;
        std::size_t visible = causal ? i + 1 : seq;
        softmax_row(row, visible);
        std::fill(row + visible, row + seq, 0.0);
      }
      StridedMap oh(out.data() + off, L, H, stride);
      oh.noalias() = p * vh;
    }
  }

  return finish(tape, q.shape(), std::move(out), {&q, &k, &v},
                [q, k, v, probs = std::move(probs), batch, seq, d, n_heads, dh, scale, L, H, stride,
                 causal](std::span<const double> g) mutable {
                  RowMat gp(L, L);
                  RowMat gs(L, L);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t h = 0; h < n_heads; ++h) {
                      std::size_t off = b * seq * d + h * dh;
                      ConstStridedMap qh(q.data().data() + off, L, H, stride);
                      ConstStridedMap kh(k.data().data() + off, L, H, stride);
                      ConstStridedMap vh(v.data().data() + off, L, H, stride);
                      ConstStridedMap go(g.data() + off, L, H, stride);
                      ConstMatMap p(probs.data() + (b * n_heads + h) * seq * seq, L, L);
                      if (v.requires_grad()) {
                        StridedMap gv(v.mutable_grad().data() + off, L, H, stride);
                        gv.noalias() += p.transpose() * go;
                      }
                      if (!q.requires_grad() && !k.requires_grad()) continue;
                      gp.noalias() = go * vh.transpose();
                      for (Eigen::Index i = 0; i < L; ++i) {
                        // Plain loop: Eigen's vectorized reductions over unaligned maps change the
                        // summation order with the buffer address, which breaks bitwise replay.
                        double dot = 0.0;
                        const Eigen::Index end = causal ? i + 1 : L;
                        for (Eigen::Index j = 0; j < end; ++j) dot += p(i, j) * gp(i, j);
                        gs.row(i) = p.row(i).cwiseProduct((gp.row(i).array() - dot).matrix());
                      }
                      gs *= scale;
                      if (q.requires_grad()) {
                        StridedMap gq(q.mutable_grad().data() + off, L, H, stride);
                        gq.noalias() += gs * kh;
                      }
                      if (k.requires_grad()) {
                        StridedMap gk(k.mutable_grad().data() + off, L, H, stride);
                        gk.noalias() += gs.transpose() * qh;
                      }
                    }
                  }
                });
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Buffer out(x.data().begin(), x.data().end());
  return finish(tape, std::move(shape), std::move(out), {&x}, [x](std::span<const double> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish(tape, {1}, {total}, {&x}, [x](std::span<const double> g) mutable {
    for (double& gx : x.mutable_grad()) gx += g[0];
  });
}

Tensor mean(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const double n = static_cast<double>(x.size());
  return finish(tape, {1}, {total / n}, {&x}, [x, n](std::span<const double> g) mutable {
    for (double& gx : x.mutable_grad()) gx += g[0] / n;
  });
}

Tensor weighted_sum(Tape& tape, const Tensor& x, std::span<const double> weights) {
  if (weights.size() != x.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for shape " +
                     shape_str(x.shape()));
  }
  double total = 0.0;
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) total += xd[i] * weights[i];
  std::vector<double> w(weights.begin(), weights.end());
  return finish(tape, {1}, {total}, {&x}, [x, w = std::move(w)](std::span<const double> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g[0] * w[i];
  });
}

}  // namespace ltm::ops

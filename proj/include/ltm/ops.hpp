#pragma once

#include <span>

#include "ltm/tensor.hpp"

namespace ltm::ops {

/// out = x·w + b over the last axis of x; leading axes are treated as batch.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(Tape& tape, const Tensor& x);

/// log(1 + exp(x)), evaluated without overflow.
Tensor softplus(Tape& tape, const Tensor& x);

Tensor add_scalar(Tape& tape, const Tensor& x, double c);

/// a + b where shape(b) is a suffix of shape(a); b is broadcast over a's leading axes.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

/// Max-subtracted softmax along `axis` (negative counts from the back).
Tensor softmax(Tape& tape, const Tensor& x, int axis);

inline constexpr double kLayerNormEps = 1e-5;

/// Standardizes each row of the last axis (population variance) then applies gain and bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

/// Scaled dot-product attention over [batch, seq, d] inputs split into `n_heads`
/// contiguous head slices of width d / n_heads. With `causal`, position i only
/// attends to positions j <= i.
Tensor multi_head_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t n_heads, bool causal = true);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

/// sum_i x_i * weights_i with constant weights; handy for probing gradients.
Tensor weighted_sum(Tape& tape, const Tensor& x, std::span<const double> weights);

/// In-place numerically stable softmax of one strided row. Shared with the attention kernel.
void softmax_row(double* row, std::size_t len, std::size_t stride = 1);

}  // namespace ltm::ops

#pragma once

#include <span>
#include <vector>

#include "uda/nn/tensor.hpp"

namespace uda::nn {

// Differentiable ops. Each records a backward closure only when some input
// requires a gradient and no NoGradGuard is active.

/// x: (N,Cin,H,W), weight: (Cout,Cin,K,K), bias: (Cout,1,1,1) or null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

/// x: (N,Cin,H,W), weight: (Cin,Cout,K,K). Output side (H-1)*stride - 2*pad + K.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
                        int pad);

/// Per-sample, per-channel normalization over H*W (no affine terms).
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));

/// Per-channel normalization over (N,H,W) with affine gamma/beta of shape (C,1,1,1).
/// Training mode uses batch statistics and updates the running estimates in
/// place; evaluation mode uses the running estimates.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Var<T>& running_mean,
                  const Var<T>& running_var, bool training, T momentum = T(0.1), T eps = T(1e-5));

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

/// 2x2 window, stride 2; H and W must be even.
template <typename T>
Var<T> max_pool2(const Var<T>& x);

/// (N,C,H,W) -> (N,C,1,1).
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// x flattened per sample to F features; weight: (Out,F,1,1); bias: (Out,1,1,1).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& x, T factor);

/// Scalar: mean over all elements of (x - target)^2.
template <typename T>
Var<T> mean_squared_to(const Var<T>& x, T target);

/// Scalar: mean |x - y|. Shapes must match.
template <typename T>
Var<T> l1_mean(const Var<T>& x, const Var<T>& y);

/// Scalar: mean binary cross-entropy of logits (N,1,1,1) against 0/1 targets.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, std::span<const T> targets);

/// Rows [begin, end) of the batch dimension, differentiable.
template <typename T>
Var<T> slice_batch(const Var<T>& x, int begin, int end);

/// Concatenation along the batch dimension, differentiable.
template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& parts);

template <typename T>
T scalar(const Var<T>& x) {
  return x->value.data.at(0);
}

}  // namespace uda::nn

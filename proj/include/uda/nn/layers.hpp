#pragma once

#include <random>
#include <string>

#include "uda/nn/ops.hpp"
#include "uda/nn/params.hpp"

namespace uda::nn {

/// Square-kernel convolution. `bias` is null when the layer feeds a norm.
template <typename T>
struct Conv2d {
  Var<T> weight, bias;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(ParamSet<T>& ps, const std::string& name, int in, int out, int kernel, int stride_,
         int pad_, bool with_bias)
      : weight(ps.add(name + ".weight", Shape{out, in, kernel, kernel})),
        bias(with_bias ? ps.add(name + ".bias", Shape{out, 1, 1, 1}) : nullptr),
        stride(stride_),
        pad(pad_) {}

  Var<T> operator()(const Var<T>& x) const { return conv2d<T>(x, weight, bias, stride, pad); }
  int fan_in() const { return weight->value.shape.c * weight->value.shape.h * weight->value.shape.w; }
};

template <typename T>
struct ConvTranspose2d {
  Var<T> weight, bias;
  int stride = 1, pad = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParamSet<T>& ps, const std::string& name, int in, int out, int kernel,
                  int stride_, int pad_, bool with_bias)
      : weight(ps.add(name + ".weight", Shape{in, out, kernel, kernel})),
        bias(with_bias ? ps.add(name + ".bias", Shape{out, 1, 1, 1}) : nullptr),
        stride(stride_),
        pad(pad_) {}

  Var<T> operator()(const Var<T>& x) const {
    return conv_transpose2d<T>(x, weight, bias, stride, pad);
  }
};

template <typename T>
struct Linear {
  Var<T> weight, bias;

  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& name, int in, int out)
      : weight(ps.add(name + ".weight", Shape{out, in, 1, 1})),
        bias(ps.add(name + ".bias", Shape{out, 1, 1, 1})) {}

  Var<T> operator()(const Var<T>& x) const { return linear<T>(x, weight, bias); }
  int fan_in() const { return static_cast<int>(weight->value.shape.sample_numel()); }
};

/// Batch normalization with affine terms; running statistics are stored in the
/// parameter set as non-trainable entries so they are checkpointed.
template <typename T>
struct BatchNorm2d {
  Var<T> gamma, beta, running_mean, running_var;

  BatchNorm2d() = default;
  BatchNorm2d(ParamSet<T>& ps, const std::string& name, int channels)
      : gamma(ps.add(name + ".gamma", Shape{channels, 1, 1, 1})),
        beta(ps.add(name + ".beta", Shape{channels, 1, 1, 1})),
        running_mean(leaf<T>(Tensor<T>(Shape{channels, 1, 1, 1}), false)),
        running_var(leaf<T>(Tensor<T>(Shape{channels, 1, 1, 1}), false)) {
    ps.adopt(name + ".running_mean", running_mean);
    ps.adopt(name + ".running_var", running_var);
  }

  Var<T> operator()(const Var<T>& x, bool training) const {
    return batch_norm<T>(x, gamma, beta, running_mean, running_var, training);
  }
};

}  // namespace uda::nn

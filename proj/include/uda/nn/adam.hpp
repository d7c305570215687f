#pragma once

#include <cmath>
#include <vector>

#include "uda/nn/params.hpp"

namespace uda::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamOptions opts) : opts_(opts) {
    for (const auto& [_, v] : params.items()) {
      params_.push_back(v);
      m_.emplace_back(v->value.numel(), 0.0);
      s_.emplace_back(v->value.numel(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& node = *params_[p];
      if (!node.requires_grad || node.grad.empty()) continue;
      auto& m = m_[p];
      auto& s = s_[p];
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = node.grad[i];
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
        s[i] = opts_.beta2 * s[i] + (1.0 - opts_.beta2) * g * g;
        const double update = opts_.learning_rate * (m[i] / c1) / (std::sqrt(s[i] / c2) + opts_.eps);
        node.value.data[i] = static_cast<T>(node.value.data[i] - update);
      }
    }
  }

  long steps() const { return t_; }

 private:
  AdamOptions opts_;
  std::vector<Var<T>> params_;
  std::vector<std::vector<double>> m_, s_;
  long t_ = 0;
};

}  // namespace uda::nn

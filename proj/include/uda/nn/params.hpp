#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "uda/nn/tensor.hpp"

namespace uda::nn {

/// Ordered, named parameter tensors. Order is the serialization order.
template <typename T>
class ParamSet {
 public:
  using Item = std::pair<std::string, Var<T>>;

  Var<T> add(const std::string& name, Shape shape) {
    for (const auto& [n, _] : items_) {
      if (n == name) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
    auto v = leaf<T>(Tensor<T>(shape), true);
    items_.emplace_back(name, v);
    return v;
  }

  /// Registers an existing variable (shared, not copied).
  void adopt(const std::string& name, Var<T> v) {
    for (const auto& [n, _] : items_) {
      if (n == name) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
    items_.emplace_back(name, std::move(v));
  }

  const std::vector<Item>& items() const { return items_; }

  Var<T> get(const std::string& name) const {
    for (const auto& [n, v] : items_) {
      if (n == name) return v;
    }
    throw std::out_of_range("no parameter named '" + name + "'");
  }

  std::size_t numel() const {
    std::size_t total = 0;
    for (const auto& [_, v] : items_) total += v->value.numel();
    return total;
  }

  void zero_grad() const {
    for (const auto& [_, v] : items_) {
      v->ensure_grad();
      v->zero_grad();
    }
  }

  bool all_finite() const;

  /// Copies values (same names/shapes) from another set, converting precision.
  template <typename U>
  void assign_from(const ParamSet<U>& other) {
    if (other.items().size() != items_.size()) throw std::invalid_argument("parameter count mismatch");
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& [name, src] = other.items()[i];
      auto& dst = items_[i].second;
      if (name != items_[i].first || !(src->value.shape == dst->value.shape)) {
        throw std::invalid_argument("parameter layout mismatch at '" + name + "'");
      }
      for (std::size_t k = 0; k < src->value.numel(); ++k) {
        dst->value.data[k] = static_cast<T>(src->value.data[k]);
      }
    }
  }

  bool values_equal(const ParamSet& other) const {
    if (other.items_.size() != items_.size()) return false;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].first != other.items_[i].first ||
          !(items_[i].second->value.shape == other.items_[i].second->value.shape) ||
          items_[i].second->value.data != other.items_[i].second->value.data) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Item> items_;
};

template <typename T>
bool ParamSet<T>::all_finite() const {
  for (const auto& [_, v] : items_) {
    for (T x : v->value.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

/// N(0, stddev) entries.
template <typename T>
void init_normal(const Var<T>& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> d(0.0, stddev);
  for (T& x : p->value.data) x = static_cast<T>(d(rng));
}

/// He-uniform: U(-b, b), b = sqrt(6 / fan_in).
template <typename T>
void init_he_uniform(const Var<T>& p, std::mt19937_64& rng, int fan_in) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> d(-bound, bound);
  for (T& x : p->value.data) x = static_cast<T>(d(rng));
}

template <typename T>
void init_constant(const Var<T>& p, double value) {
  std::fill(p->value.data.begin(), p->value.data.end(), static_cast<T>(value));
}

}  // namespace uda::nn

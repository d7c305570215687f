#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <string>
#include <vector>

namespace uda::nn {

/// 64-byte aligned storage. Vectorized kernels split work by address, so a
/// fixed alignment keeps results bit-identical wherever a buffer lands.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}  // NOLINT

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// NCHW shape. Dense activations use (N, F, 1, 1).
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t sample_numel() const { return static_cast<std::size_t>(c) * h * w; }
  std::array<int, 4> dims() const { return {n, c, h, w}; }
  std::string str() const;
  bool operator==(const Shape&) const = default;
};

template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.numel(), fill) {}
  Tensor(Shape s, std::vector<T> values);

  std::size_t numel() const { return data.size(); }
  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * shape.sample_numel(); }
  const T* sample(int i) const {
    return data.data() + static_cast<std::size_t>(i) * shape.sample_numel();
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

/// Graph node of the reverse-mode tape. `backward` reads `grad` and
/// accumulates into the parents' grads.
template <typename T>
struct Node {
  Tensor<T> value;
  Buffer<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.numel(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// Leaf node; parameters are leaves with requires_grad = true.
template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad);

template <typename T>
Var<T> constant(Tensor<T> value) {
  return leaf<T>(std::move(value), false);
}

/// Same value, cut from the graph.
template <typename T>
Var<T> detach(const Var<T>& x) {
  return constant<T>(x->value);
}

/// Reverse sweep from a scalar root. Leaf grads accumulate.
template <typename T>
void backward(const Var<T>& root);

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

/// Fingerprint of every branch taken by non-smooth ops (ReLU masks, pooling
/// argmax, L1 signs) on this thread. Two evaluations with equal fingerprints
/// lie on the same smooth piece of the function.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t fingerprint() const { return hash_; }
  static BranchTrace* current();
  void record(std::uint64_t v) { hash_ = (hash_ ^ v) * 0x100000001b3ULL; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  BranchTrace* previous_;
};

}  // namespace uda::nn

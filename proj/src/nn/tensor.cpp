#include "uda/nn/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace uda::nn {

namespace {
thread_local bool g_no_grad = false;
thread_local BranchTrace* g_trace = nullptr;
}  // namespace

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(s), data(values.begin(), values.end()) {
  if (data.size() != shape.numel()) {
    throw std::invalid_argument("tensor data size does not match shape " + shape.str());
  }
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

BranchTrace::BranchTrace() : previous_(g_trace) { g_trace = this; }
BranchTrace::~BranchTrace() { g_trace = previous_; }
BranchTrace* BranchTrace::current() { return g_trace; }

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

template <typename T>
void backward(const Var<T>& root) {
  if (root->value.numel() != 1) throw std::invalid_argument("backward() needs a scalar root");
  if (!root->requires_grad) return;

  // Iterative post-order DFS over nodes that carry gradients.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template struct Tensor<float>;
template struct Tensor<double>;
template Var<float> leaf(Tensor<float>, bool);
template Var<double> leaf(Tensor<double>, bool);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace uda::nn

#include "svc/nn/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace svc::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != values.size())
    throw std::invalid_argument("tensor: value count does not match shape " +
                                shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
  return node_->value[0];
}

Tensor Tensor::detach() const {
  return constant(node_->shape, node_->value);
}

Tensor Tensor::clone() const {
  Tensor t = constant(node_->shape, node_->value);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

void Tensor::backward() {
  if (size() != 1)
    throw std::invalid_argument("backward() requires a scalar tensor");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& t : inputs) n->inputs.push_back(t.node_ptr());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace svc::nn

#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// double tensors. A Tensor is a cheap shared handle to a graph node; ops
// create new nodes that remember their inputs and a backward closure.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace svc::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

struct Node;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  // Allocates (zeroed) gradient storage on first use.
  std::span<double> grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor scalar(double v) { return constant({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  double item() const;

  // Same values, no history, no gradient.
  Tensor detach() const;
  // Deep copy of values as a new leaf with the same requires_grad flag.
  Tensor clone() const;

  // Backpropagates d(this)/d(leaves); this must hold a single element.
  void backward();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops record no history (outputs never require grad).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds an op result. The node requires grad if grad mode is on and any
// input requires grad; otherwise history and `backward` are dropped.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward);

// Ordered named parameter list; the order defines checkpoint layout and
// optimizer state pairing.
struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

void zero_grads(const ParamList& params);

}  // namespace svc::nn

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "trajevent/tensor.hpp"

namespace trajevent::autodiff {

class Tape;

// One vertex of the computation graph. `value` is the cached forward
// result; `grad` stays empty until backward reaches the node.
class Node {
 public:
  virtual ~Node() = default;

  Tensor value;
  Tensor grad;
  bool requires_grad = false;

  const std::vector<Node*>& inputs() const { return inputs_; }
  virtual const char* op_name() const { return "leaf"; }

 protected:
  friend class Tape;
  // Scatter this->grad into the inputs' grads.
  virtual void backward() {}
  // Allocate-and-zero an input's grad on first touch.
  static Tensor& grad_of(Node* n) {
    if (n->grad.numel() == 0) n->grad = Tensor(n->value.shape());
    return n->grad;
  }
  std::vector<Node*> inputs_;
};

// A named, trainable tensor. Lives outside any tape; bound into a tape as a
// leaf node per forward pass so parallel tapes never share mutable state.
struct Parameter {
  std::string name;
  Tensor value;
};

using ParameterSet = std::vector<Parameter>;

size_t param_count(const ParameterSet& params);

// Arena of nodes built in topological (creation) order. Single-threaded;
// run one tape per worker and sum gradients afterwards.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Node* input(Tensor v);                  // constant, no gradient
  Node* param(const Tensor& v);           // differentiable leaf
  std::vector<Node*> bind(const ParameterSet& params);

  // Forward operations.
  Node* add(Node* a, Node* b);
  Node* mul(Node* a, Node* b);
  Node* mul_scalar(Node* a, double c);
  Node* matmul(Node* a, Node* b, bool transpose_a = false,
               bool transpose_b = false);
  Node* linear(Node* x, Node* w, Node* b);
  Node* conv1d_causal_dilated(Node* x, Node* kernel, Node* bias,
                              size_t dilation);
  Node* gated_activation(Node* filt, Node* gate);
  Node* relu(Node* a);
  Node* layer_norm(Node* x, Node* gamma, Node* beta, double eps = 1e-5);
  Node* softmax(Node* x, int axis);
  Node* mean(Node* x, size_t axis);       // rank-2 -> rank-1
  Node* mean_all(Node* x);                // -> scalar
  Node* concat(const std::vector<Node*>& xs, size_t axis);
  Node* transpose(Node* x);
  Node* cross_entropy(Node* probs, size_t target);

  // Reverse pass from a scalar loss. Visits each node exactly once in
  // reverse creation order.
  void backward(Node* loss);

  size_t size() const { return nodes_.size(); }
  const std::vector<std::unique_ptr<Node>>& nodes() const { return nodes_; }

 private:
  Node* adopt(std::unique_ptr<Node> n);
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace trajevent::autodiff

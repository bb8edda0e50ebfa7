#pragma once

// Dense row-major tensors of doubles with a reverse-mode gradient tape.
//
// A Tensor is a cheap handle onto a shared node. Every differentiable op
// creates a new node that remembers its parents and an adjoint closure;
// backward() orders the reachable nodes topologically and runs the
// closures once each, in reverse. A graph must stay on one thread while it
// is being built or differentiated. Leaf tensors that do not require grad
// can be shared freely.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bingan {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  // Releases long parent chains iteratively instead of recursively.
  ~Node();

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::vector<double>& mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  // Fresh leaf with copied data and no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const char* op_name() const { return node_->op; }

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of the nodes reachable from a root: each node appears
/// after all of its inputs.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& nodes() const { return order_; }

  // Runs every adjoint closure once, in reverse topological order.
  void run_backward() const;

 private:
  std::vector<detail::Node*> order_;
};

/// Populates grads of every requires_grad ancestor of a scalar loss.
/// Gradients accumulate: call zero_grad() on leaves between steps.
void backward(const Tensor& loss);

// ---- Linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Cross-correlation. x is N×C×H×W, w is F×C×KH×KW. Output spatial size is
// floor((H + 2·pad − KH) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad);

// Adds a per-channel bias b (length x.dim(1)) to an N×C or N×C×H×W tensor.
Tensor add_bias(const Tensor& x, const Tensor& b);

// ---- Elementwise ----------------------------------------------------------
// Binary ops accept equal shapes or a single-element right-hand side.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);  // subgradient 0 at 0
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);
Tensor softplus(const Tensor& x);  // log(1 + e^x), overflow-safe
Tensor softsign(const Tensor& x, double gamma);  // x / (|x| + gamma)

// ---- Reductions and reshaping --------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_rows(const Tensor& x);  // N×K -> 1×K column means
Tensor avg_pool_global(const Tensor& x);  // N×C×H×W -> N×C
Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);  // N×... -> N×(rest)
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor upsample2x(const Tensor& x);  // nearest neighbour, N×C×H×W

// Per-channel normalisation with batch statistics followed by a learned
// affine map. x is N×C or N×C×H×W; gain and shift have length C.
Tensor batch_stats_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

// Same values, no gradient flows back to x.
Tensor stop_gradient(const Tensor& x);

// Hard sign with sign(0) = +1. Never differentiable: the result is a
// constant leaf.
Tensor sign(const Tensor& x);

bool all_finite(std::span<const double> values);

}  // namespace bingan

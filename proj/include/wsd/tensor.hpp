#pragma once

// Dense row-major float64 tensors with tape-free reverse-mode differentiation.
//
// Every op returns a new Tensor. When gradients are enabled and any input
// requires a gradient, the result remembers its parents and a local rule that
// pushes the result's gradient into them. backward() walks the resulting DAG
// in reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wsd {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is written
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Only for leaves (parameters); intermediate results must stay immutable.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Fresh leaf with the same values and no history.
  Tensor detach() const;
  Tensor clone(bool requires_grad) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& impl() const { return node_; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, const char*,
                            std::vector<Tensor>,
                            std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

// Builds an op output; parents and the local rule are dropped when gradients
// are disabled or no parent requires one.
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> rule);

bool grad_enabled();

// Disables graph construction on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse topological traversal record for one backward pass.
struct Graph {
  std::vector<detail::Node*> nodes;  // inputs precede outputs

  static Graph build(const Tensor& root);
};

// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
void backward(const Tensor& loss);

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m×k]·[n×k]ᵀ
Tensor matvec(const Tensor& w, const Tensor& x);     // [m×n]·[n]
Tensor transpose(const Tensor& a);

// --- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);  // [m×n] + [n] per row
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor log(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);
// Inverted dropout: keeps each entry with probability 1 - rate and scales
// kept entries by 1 / (1 - rate).
Tensor dropout(const Tensor& a, double rate, Rng& rng);
Tensor apply_mask(const Tensor& a, std::span<const double> mask);

// --- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // [m×n] -> [n]
Tensor max_rows(const Tensor& a);   // [m×n] -> [n], ties route to first row
Tensor mean_of(std::span<const Tensor> parts);
Tensor max_of(std::span<const Tensor> parts);

Tensor softmax(const Tensor& x);       // 1-D
Tensor softmax_rows(const Tensor& x);  // row-wise on 2-D

// --- structure ------------------------------------------------------------

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor row(const Tensor& a, std::size_t r);  // [m×n] -> [n]
Tensor index(const Tensor& a, std::size_t i);  // 1-D -> [1]
Tensor concat(std::span<const Tensor> parts, std::size_t axis = 0);
Tensor reshape(const Tensor& a, Shape shape);

Tensor embedding(const Tensor& table, std::span<const int> ids);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-12);

}  // namespace wsd

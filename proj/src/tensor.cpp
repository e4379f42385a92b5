#include "wsd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "wsd/error.hpp"

namespace wsd {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
}

void require_dim(const char* op, const Tensor& a, std::size_t dim) {
  if (a.dim() != dim)
    throw DimensionError(std::string(op) + ": expected " + std::to_string(dim) +
                         "-D tensor, got " + shape_str(a.shape()));
}

detail::Node* parent(detail::Node& out, std::size_t i) { return out.parents[i].get(); }

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// --- Tensor -------------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  check_shape(shape);
  if (product(shape) != data.size())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  auto n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::numel() const { return shape().empty() ? 0 : node_->data.size(); }

std::size_t Tensor::rows() const {
  require_dim("rows", *this, 2);
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_dim("cols", *this, 2);
  return node_->shape[1];
}

std::span<const double> Tensor::data() const {
  shape();
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  shape();
  if (node_->backward) throw ContractError("mutable_data on a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  shape();
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

Tensor Tensor::clone(bool requires_grad) const { return Tensor(shape(), node_->data, requires_grad); }

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<Tensor> parents, std::function<void(detail::Node&)> rule) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.impl());
    node->backward = std::move(rule);
  }
  return Tensor(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// --- backward -------------------------------------------------------------------

Graph Graph::build(const Tensor& root) {
  Graph g;
  std::unordered_set<detail::Node*> seen;
  // Iterative post-order DFS; second slot marks "children already pushed".
  std::vector<std::pair<detail::Node*, bool>> stack{{root.node(), false}};
  while (!stack.empty()) {
    auto [node, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      g.nodes.push_back(node);
      continue;
    }
    if (!seen.insert(node).second) continue;
    stack.push_back({node, true});
    for (auto it = node->parents.rbegin(); it != node->parents.rend(); ++it)
      if ((*it)->requires_grad && !seen.count(it->get())) stack.push_back({it->get(), false});
  }
  return g;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward() requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  if (!loss.requires_grad()) return;
  Graph g = Graph::build(loss);
  for (auto* n : g.nodes)
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// --- linear algebra ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_dim("matmul", a, 2);
  require_dim("matmul", b, 2);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  auto A = a.data(), B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  return make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](detail::Node& o) {
    auto* pa = parent(o, 0);
    auto* pb = parent(o, 1);
    const auto& G = o.grad;
    if (pa->requires_grad) {
      auto& ga = pa->ensure_grad();
      const auto& Bd = pb->data;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * Bd[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (pb->requires_grad) {
      auto& gb = pb->ensure_grad();
      const auto& Ad = pa->data;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Ad[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_dim("matmul_nt", a, 2);
  require_dim("matmul_nt", b, 2);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) mismatch("matmul_nt", a, b);
  std::vector<double> out(m * n);
  auto A = a.data(), B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += A[i * k + p] * B[j * k + p];
      out[i * n + j] = s;
    }
  return make_result({m, n}, std::move(out), "matmul_nt", {a, b}, [m, k, n](detail::Node& o) {
    auto* pa = parent(o, 0);
    auto* pb = parent(o, 1);
    const auto& G = o.grad;
    if (pa->requires_grad) {
      auto& ga = pa->ensure_grad();
      const auto& Bd = pb->data;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * Bd[j * k + p];
        }
    }
    if (pb->requires_grad) {
      auto& gb = pb->ensure_grad();
      const auto& Ad = pa->data;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += g * Ad[i * k + p];
        }
    }
  });
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  require_dim("matvec", w, 2);
  require_dim("matvec", x, 1);
  const std::size_t m = w.rows(), n = w.cols();
  if (x.numel() != n) mismatch("matvec", w, x);
  std::vector<double> out(m);
  auto W = w.data(), X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += W[i * n + j] * X[j];
    out[i] = s;
  }
  return make_result({m}, std::move(out), "matvec", {w, x}, [m, n](detail::Node& o) {
    auto* pw = parent(o, 0);
    auto* px = parent(o, 1);
    const auto& G = o.grad;
    if (pw->requires_grad) {
      auto& gw = pw->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += G[i] * px->data[j];
    }
    if (px->requires_grad) {
      auto& gx = px->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[j] += G[i] * pw->data[i * n + j];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_dim("transpose", a, 2);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), "transpose", {a}, [m, n](detail::Node& o) {
    auto& ga = parent(o, 0)->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += o.grad[j * m + i];
  });
}

// --- elementwise -------------------------------------------------------------------

namespace {

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = fwd(A[i]);
  return make_result(a.shape(), std::move(out), op, {a}, [deriv](detail::Node& o) {
    auto* pa = parent(o, 0);
    auto& ga = pa->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * deriv(pa->data[i], o.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("add", a, b);
  auto A = a.data(), B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [](detail::Node& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto* pn = parent(o, p);
      if (!pn->requires_grad) continue;
      auto& g = pn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("sub", a, b);
  auto A = a.data(), B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [](detail::Node& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto* pn = parent(o, p);
      if (!pn->requires_grad) continue;
      auto& g = pn->ensure_grad();
      const double sign = p == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("mul", a, b);
  auto A = a.data(), B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](detail::Node& o) {
    auto* pa = parent(o, 0);
    auto* pb = parent(o, 1);
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pa->data[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& r) {
  require_dim("add_row", a, 2);
  require_dim("add_row", r, 1);
  const std::size_t m = a.rows(), n = a.cols();
  if (r.numel() != n) mismatch("add_row", a, r);
  auto A = a.data(), R = r.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] + R[j];
  return make_result(a.shape(), std::move(out), "add_row", {a, r}, [m, n](detail::Node& o) {
    auto* pa = parent(o, 0);
    auto* pr = parent(o, 1);
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (pr->requires_grad) {
      auto& g = pr->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [inv_sqrt2pi](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
      });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary("clamp_min", a, [floor](double x) { return x < floor ? floor : x; },
               [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Tensor apply_mask(const Tensor& a, std::span<const double> mask) {
  if (mask.size() != a.numel())
    throw DimensionError("apply_mask: mask length " + std::to_string(mask.size()) +
                         " vs tensor " + shape_str(a.shape()));
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * mask[i];
  std::vector<double> m(mask.begin(), mask.end());
  return make_result(a.shape(), std::move(out), "apply_mask", {a},
                     [m = std::move(m)](detail::Node& o) {
                       auto& g = parent(o, 0)->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * m[i];
                     });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  const double kept = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.numel());
  for (auto& m : mask) m = keep(rng) ? kept : 0.0;
  return apply_mask(a, mask);
}

// --- reductions -----------------------------------------------------------------

Tensor sum(const Tensor& a) {
  auto A = a.data();
  double s = 0.0;
  for (double v : A) s += v;
  return make_result({1}, {s}, "sum", {a}, [](detail::Node& o) {
    auto& g = parent(o, 0)->ensure_grad();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mean_rows(const Tensor& a) {
  require_dim("mean_rows", a, 2);
  const std::size_t m = a.rows(), n = a.cols();
  auto A = a.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += A[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& v : out) v *= inv;
  return make_result({n}, std::move(out), "mean_rows", {a}, [m, n, inv](detail::Node& o) {
    auto& g = parent(o, 0)->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j] * inv;
  });
}

Tensor max_rows(const Tensor& a) {
  require_dim("max_rows", a, 2);
  const std::size_t m = a.rows(), n = a.cols();
  auto A = a.data();
  std::vector<double> out(A.begin(), A.begin() + n);
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t i = 1; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (A[i * n + j] > out[j]) {
        out[j] = A[i * n + j];
        arg[j] = i;
      }
  return make_result({n}, std::move(out), "max_rows", {a},
                     [n, arg = std::move(arg)](detail::Node& o) {
                       auto& g = parent(o, 0)->ensure_grad();
                       for (std::size_t j = 0; j < n; ++j) g[arg[j] * n + j] += o.grad[j];
                     });
}

Tensor mean_of(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("mean_of over an empty set");
  const Shape& shape = parts[0].shape();
  for (const auto& p : parts)
    if (p.shape() != shape) mismatch("mean_of", parts[0], p);
  const std::size_t n = parts[0].numel();
  const double inv = 1.0 / static_cast<double>(parts.size());
  std::vector<double> out(n, 0.0);
  for (const auto& p : parts) {
    auto P = p.data();
    for (std::size_t j = 0; j < n; ++j) out[j] += P[j];
  }
  for (auto& v : out) v *= inv;
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return make_result(shape, std::move(out), "mean_of", std::move(ps), [inv](detail::Node& o) {
    for (auto& pn : o.parents) {
      if (!pn->requires_grad) continue;
      auto& g = pn->ensure_grad();
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += o.grad[j] * inv;
    }
  });
}

Tensor max_of(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("max_of over an empty set");
  const Shape& shape = parts[0].shape();
  for (const auto& p : parts)
    if (p.shape() != shape) mismatch("max_of", parts[0], p);
  const std::size_t n = parts[0].numel();
  auto first = parts[0].data();
  std::vector<double> out(first.begin(), first.end());
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto P = parts[i].data();
    for (std::size_t j = 0; j < n; ++j)
      if (P[j] > out[j]) {
        out[j] = P[j];
        arg[j] = i;
      }
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return make_result(shape, std::move(out), "max_of", std::move(ps),
                     [arg = std::move(arg)](detail::Node& o) {
                       for (std::size_t j = 0; j < arg.size(); ++j) {
                         auto* pn = o.parents[arg[j]].get();
                         if (pn->requires_grad) pn->ensure_grad()[j] += o.grad[j];
                       }
                     });
}

namespace {

void softmax_inplace(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(in[i])) throw NumericError("softmax: non-finite input");
    mx = std::max(mx, in[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    z += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

void softmax_backward(const double* y, const double* gy, double* gx, std::size_t n) {
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += gy[i] * y[i];
  for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (gy[i] - dot);
}

}  // namespace

Tensor softmax(const Tensor& x) {
  require_dim("softmax", x, 1);
  const std::size_t n = x.numel();
  std::vector<double> out(n);
  softmax_inplace(x.data().data(), out.data(), n);
  return make_result({n}, std::move(out), "softmax", {x}, [n](detail::Node& o) {
    auto& g = parent(o, 0)->ensure_grad();
    softmax_backward(o.data.data(), o.grad.data(), g.data(), n);
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_dim("softmax_rows", x, 2);
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) softmax_inplace(X.data() + i * n, out.data() + i * n, n);
  return make_result(x.shape(), std::move(out), "softmax_rows", {x}, [m, n](detail::Node& o) {
    auto& g = parent(o, 0)->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      softmax_backward(o.data.data() + i * n, o.grad.data() + i * n, g.data() + i * n, n);
  });
}

// --- structure ----------------------------------------------------------------------

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  require_dim("slice_rows", a, 2);
  const std::size_t n = a.cols();
  if (count == 0 || start + count > a.rows())
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + shape_str(a.shape()));
  auto A = a.data();
  std::vector<double> out(A.begin() + start * n, A.begin() + (start + count) * n);
  return make_result({count, n}, std::move(out), "slice_rows", {a}, [start, n](detail::Node& o) {
    auto& g = parent(o, 0)->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[start * n + i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_dim("slice_cols", a, 2);
  const std::size_t m = a.rows(), n = a.cols();
  if (count == 0 || start + count > n)
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + shape_str(a.shape()));
  auto A = a.data();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = A[i * n + start + j];
  return make_result({m, count}, std::move(out), "slice_cols", {a},
                     [m, n, start, count](detail::Node& o) {
                       auto& g = parent(o, 0)->ensure_grad();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           g[i * n + start + j] += o.grad[i * count + j];
                     });
}

Tensor row(const Tensor& a, std::size_t r) { return reshape(slice_rows(a, r, 1), {a.cols()}); }

Tensor index(const Tensor& a, std::size_t i) {
  require_dim("index", a, 1);
  if (i >= a.numel())
    throw DimensionError("index " + std::to_string(i) + " out of " + shape_str(a.shape()));
  return make_result({1}, {a.data()[i]}, "index", {a}, [i](detail::Node& o) {
    parent(o, 0)->ensure_grad()[i] += o.grad[0];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of an empty set");
  const std::size_t d = parts[0].dim();
  if (d > 2 || axis >= d) throw DimensionError("concat: unsupported axis for " + shape_str(parts[0].shape()));
  for (const auto& p : parts) {
    if (p.dim() != d) mismatch("concat", parts[0], p);
    if (d == 2 && axis == 0 && p.cols() != parts[0].cols()) mismatch("concat", parts[0], p);
    if (d == 2 && axis == 1 && p.rows() != parts[0].rows()) mismatch("concat", parts[0], p);
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  if (d == 1 || axis == 0) {
    // Row-major concatenation along the leading axis is plain appending.
    std::vector<double> out;
    std::size_t lead = 0;
    for (const auto& p : parts) {
      out.insert(out.end(), p.data().begin(), p.data().end());
      lead += p.shape()[0];
    }
    Shape shape = parts[0].shape();
    shape[0] = lead;
    return make_result(shape, std::move(out), "concat", std::move(ps), [](detail::Node& o) {
      std::size_t off = 0;
      for (auto& pn : o.parents) {
        const std::size_t len = pn->data.size();
        if (pn->requires_grad) {
          auto& g = pn->ensure_grad();
          for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[off + i];
        }
        off += len;
      }
    });
  }
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) total += p.cols();
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    auto P = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * total + off + j] = P[i * c + j];
    off += c;
  }
  return make_result({m, total}, std::move(out), "concat_cols", std::move(ps),
                     [m, total](detail::Node& o) {
                       std::size_t off = 0;
                       for (auto& pn : o.parents) {
                         const std::size_t c = pn->shape[1];
                         if (pn->requires_grad) {
                           auto& g = pn->ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               g[i * c + j] += o.grad[i * total + off + j];
                         }
                         off += c;
                       }
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_shape(shape);
  if (product(shape) != a.numel())
    throw DimensionError("reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  auto A = a.data();
  return make_result(std::move(shape), std::vector<double>(A.begin(), A.end()), "reshape", {a},
                     [](detail::Node& o) {
                       auto& g = parent(o, 0)->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                     });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_dim("embedding", table, 2);
  if (ids.empty()) throw ContractError("embedding lookup with no ids");
  const std::size_t v = table.rows(), h = table.cols();
  std::vector<double> out(ids.size() * h);
  auto T = table.data();
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= v)
      throw ContractError("embedding id " + std::to_string(ids[t]) + " out of range for table " +
                          shape_str(table.shape()));
    std::copy_n(T.begin() + ids[t] * h, h, out.begin() + t * h);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return make_result({ids.size(), h}, std::move(out), "embedding", {table},
                     [h, idv = std::move(idv)](detail::Node& o) {
                       auto& g = parent(o, 0)->ensure_grad();
                       for (std::size_t t = 0; t < idv.size(); ++t)
                         for (std::size_t j = 0; j < h; ++j) g[idv[t] * h + j] += o.grad[t * h + j];
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_dim("layer_norm", x, 2);
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.numel() != n) mismatch("layer_norm", x, gain);
  if (bias.numel() != n) mismatch("layer_norm", x, bias);
  auto X = x.data(), G = gain.data(), B = bias.data();
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += X[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = X[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (X[i * n + j] - mu) * inv_std[i];
      out[i * n + j] = G[j] * xhat[i * n + j] + B[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), "layer_norm", {x, gain, bias},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& o) {
        auto* px = parent(o, 0);
        auto* pg = parent(o, 1);
        auto* pb = parent(o, 2);
        const auto& dy = o.grad;
        if (pg->requires_grad) {
          auto& gg = pg->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += dy[i * n + j] * xhat[i * n + j];
        }
        if (pb->requires_grad) {
          auto& gb = pb->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += dy[i * n + j];
        }
        if (px->requires_grad) {
          auto& gx = px->ensure_grad();
          const auto& gain_v = pg->data;
          const double nd = static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = dy[i * n + j] * gain_v[j];
              s1 += dxh;
              s2 += dxh * xhat[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = dy[i * n + j] * gain_v[j];
              gx[i * n + j] += inv_std[i] / nd * (nd * dxh - s1 - xhat[i * n + j] * s2);
            }
          }
        }
      });
}

}  // namespace wsd

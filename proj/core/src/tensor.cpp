#include "bingan/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "bingan/errors.hpp"

namespace bingan {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Builds the result node. Parents and the adjoint are kept only when some
// parent takes part in differentiation.
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<NodePtr> parents, std::function<void(Node&)> adjoint) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(adjoint);
  }
  return Tensor(std::move(node));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

bool broadcast_scalar(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return false;
  if (b.size() == 1) return true;
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                       " and " + to_string(b.shape()));
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  return make_result(x.shape(), std::move(out), op, {x.node()}, [deriv](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(in.data[i], self.data[i]);
  });
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, stride, pad, ho, wo;
  std::size_t plane() const { return ho * wo; }
  std::size_t cols() const { return n * ho * wo; }
  std::size_t patch() const { return c * kh * kw; }
};

// Lays input patches out as a (C·KH·KW) × (N·Ho·Wo) matrix.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t p = g.cols();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* dst = cols + ((c * g.kh + ki) * g.kw + kj) * p;
        for (std::size_t n = 0; n < g.n; ++n) {
          const double* src = x + (n * g.c + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
            double* row = dst + (n * g.ho + oy) * g.wo;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(row, row + g.wo, 0.0);
              continue;
            }
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
              row[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[iy * g.w + ix];
            }
          }
        }
      }
    }
  }
}

void col2im_accumulate(const ConvGeometry& g, const double* cols, double* dx) {
  const std::size_t p = g.cols();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* src = cols + ((c * g.kh + ki) * g.kw + kj) * p;
        for (std::size_t n = 0; n < g.n; ++n) {
          double* dst = dx + (n * g.c + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            const double* row = src + (n * g.ho + oy) * g.wo;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
              if (ix >= 0 && ix < static_cast<long>(g.w)) dst[iy * g.w + ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

detail::Node::~Node() {
  std::vector<std::shared_ptr<Node>> pending = std::move(parents);
  while (!pending.empty()) {
    std::shared_ptr<Node> node = std::move(pending.back());
    pending.pop_back();
    if (node.use_count() == 1) {
      for (auto& p : node->parents) pending.push_back(std::move(p));
      node->parents.clear();
      node->backward = nullptr;
    }
  }
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() : Tensor(Shape{}, 0.0) {}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dims must be positive, got " + bingan::to_string(shape));
  }
  node_->data.assign(numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dims must be positive, got " + bingan::to_string(shape));
  }
  if (numel(shape) != values.size()) {
    throw DimensionError("shape " + bingan::to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis out of range for shape " + bingan::to_string(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + bingan::to_string(shape()));
  return node_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->parents.empty()) throw ContractError("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = on;
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data); }

// ---------------------------------------------------------------------------

Tape Tape::record(const Tensor& root) {
  Tape tape;
  std::unordered_set<const Node*> seen;
  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::run_backward() const {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw ContractError("backward() on a loss with no differentiable inputs");
  const Tape tape = Tape::record(loss);
  loss.node()->ensure_grad()[0] += 1.0;
  tape.run_backward();
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be 2-D");
  require(a.dim(1) == b.dim(0),
          "matmul: inner dims differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return make_result({m, n}, std::move(out), "matmul", {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    ConstMap g(self.grad.data(), m, n);
    if (pa.requires_grad) {
      MutMap(pa.ensure_grad().data(), m, k).noalias() += g * ConstMap(pb.data.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MutMap(pb.ensure_grad().data(), k, n).noalias() += ConstMap(pa.data.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: operand must be 2-D");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  MutMap(out.data(), n, m) = ConstMap(a.data().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), "transpose", {a.node()}, [m, n](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    MutMap(in.ensure_grad().data(), m, n) += ConstMap(self.grad.data(), n, m).transpose();
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  require(x.rank() == 4, "conv2d: input must be N×C×H×W, got " + to_string(x.shape()));
  require(w.rank() == 4, "conv2d: kernel must be F×C×KH×KW, got " + to_string(w.shape()));
  require(x.dim(1) == w.dim(1), "conv2d: channel mismatch " + to_string(x.shape()) + " vs " +
                                    to_string(w.shape()));
  if (stride == 0) throw DimensionError("conv2d: stride must be >= 1");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), stride, pad, 0, 0};
  require(g.h + 2 * pad >= g.kh && g.w + 2 * pad >= g.kw,
          "conv2d: kernel does not fit padded input " + to_string(x.shape()));
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;

  // Images are processed in chunks so the column buffer stays cache sized.
  const std::size_t per_image = g.patch() * g.plane();
  const std::size_t chunk = std::clamp<std::size_t>((std::size_t{1} << 17) / std::max<std::size_t>(per_image, 1), 1, g.n);
  const std::size_t in_image = g.c * g.h * g.w;

  std::vector<double> out(g.n * g.f * g.plane());
  {
    std::vector<double> cols(per_image * chunk);
    RowMat out_t(g.f, chunk * g.plane());
    for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
      ConvGeometry part = g;
      part.n = std::min(chunk, g.n - n0);
      im2col(part, x.data().data() + n0 * in_image, cols.data());
      auto dst = out_t.leftCols(part.cols());
      dst.noalias() = ConstMap(w.data().data(), g.f, g.patch()) * ConstMap(cols.data(), g.patch(), part.cols());
      for (std::size_t n = 0; n < part.n; ++n) {
        for (std::size_t f = 0; f < g.f; ++f) {
          const double* src = out_t.data() + f * out_t.cols() + n * g.plane();
          std::copy(src, src + g.plane(), out.begin() + ((n0 + n) * g.f + f) * g.plane());
        }
      }
    }
  }
  return make_result({g.n, g.f, g.ho, g.wo}, std::move(out), "conv2d", {x.node(), w.node()},
                     [g, chunk, per_image, in_image](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    std::vector<double> cols(per_image * chunk);
    RowMat grad_t(g.f, chunk * g.plane());
    for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
      ConvGeometry part = g;
      part.n = std::min(chunk, g.n - n0);
      for (std::size_t n = 0; n < part.n; ++n) {
        for (std::size_t f = 0; f < g.f; ++f) {
          const double* src = self.grad.data() + ((n0 + n) * g.f + f) * g.plane();
          std::copy(src, src + g.plane(), grad_t.data() + f * grad_t.cols() + n * g.plane());
        }
      }
      const auto grad_part = grad_t.leftCols(part.cols());
      if (pw.requires_grad) {
        im2col(part, px.data.data() + n0 * in_image, cols.data());
        MutMap(pw.ensure_grad().data(), g.f, g.patch()).noalias() +=
            grad_part * ConstMap(cols.data(), g.patch(), part.cols()).transpose();
      }
      if (px.requires_grad) {
        MutMap(cols.data(), g.patch(), part.cols()).noalias() =
            ConstMap(pw.data.data(), g.f, g.patch()).transpose() * grad_part;
        col2im_accumulate(part, cols.data(), px.ensure_grad().data() + n0 * in_image);
      }
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require(x.rank() >= 2, "add_bias: input needs a channel axis");
  require(b.size() == x.dim(1), "add_bias: bias of shape " + to_string(b.shape()) +
                                    " does not match channels of " + to_string(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t k = 0; k < inner; ++k) out[(i * c + j) * inner + k] += b[j];
  return make_result(x.shape(), std::move(out), "add_bias", {x.node(), b.node()}, [n, c, inner](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      auto& gx = px.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
          for (std::size_t k = 0; k < inner; ++k) gb[j] += self.grad[(i * c + j) * inner + k];
    }
  });
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bc = broadcast_scalar(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[bc ? 0 : i];
  return make_result(a.shape(), std::move(out), "add", {a.node(), b.node()}, [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc ? 0 : i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const bool bc = broadcast_scalar(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[bc ? 0 : i];
  return make_result(a.shape(), std::move(out), "sub", {a.node(), b.node()}, [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc ? 0 : i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const bool bc = broadcast_scalar(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[bc ? 0 : i];
  return make_result(a.shape(), std::move(out), "mul", {a.node(), b.node()}, [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[bc ? 0 : i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc ? 0 : i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, "add_scalar", [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& x) {
  return unary(x, "abs", [](double v) { return std::fabs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, "softplus", [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor softsign(const Tensor& x, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("softsign: gamma must be > 0, got " + std::to_string(gamma));
  return unary(
      x, "softsign", [gamma](double v) { return v / (std::fabs(v) + gamma); },
      [gamma](double v, double) {
        const double d = std::fabs(v) + gamma;
        return gamma / (d * d);
      });
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({}, {total}, "sum", {x.node()}, [](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const double n = static_cast<double>(x.size());
  return make_result({}, {total / n}, "mean", {x.node()}, [n](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (auto& v : g) v += self.grad[0] / n;
  });
}

Tensor mean_rows(const Tensor& x) {
  require(x.rank() == 2, "mean_rows: input must be 2-D, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), k = x.dim(1);
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out[j] += x[i * k + j];
  for (auto& v : out) v /= static_cast<double>(n);
  return make_result({1, k}, std::move(out), "mean_rows", {x.node()}, [n, k](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) g[i * k + j] += self.grad[j] / static_cast<double>(n);
  });
}

Tensor avg_pool_global(const Tensor& x) {
  require(x.rank() == 4, "avg_pool_global: input must be N×C×H×W, got " + to_string(x.shape()));
  const std::size_t nc = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(nc, 0.0);
  for (std::size_t i = 0; i < nc; ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += x[i * plane + p];
    out[i] = s / static_cast<double>(plane);
  }
  return make_result({x.dim(0), x.dim(1)}, std::move(out), "avg_pool_global", {x.node()},
                     [nc, plane](Node& self) {
                       Node& in = *self.parents[0];
                       if (!in.requires_grad) return;
                       auto& g = in.ensure_grad();
                       const double inv = 1.0 / static_cast<double>(plane);
                       for (std::size_t i = 0; i < nc; ++i)
                         for (std::size_t p = 0; p < plane; ++p) g[i * plane + p] += self.grad[i] * inv;
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {x.node()}, [](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor flatten(const Tensor& x) {
  require(x.rank() >= 1, "flatten: scalar input");
  return reshape(x, {x.dim(0), x.size() / x.dim(0)});
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 1 && a.rank() == b.rank(), "concat_rows: rank mismatch");
  for (std::size_t i = 1; i < a.rank(); ++i) {
    require(a.dim(i) == b.dim(i), "concat_rows: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t split = a.size();
  return make_result(std::move(shape), std::move(out), "concat_rows", {a.node(), b.node()}, [split](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < split; ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[split + i];
    }
  });
}

Tensor upsample2x(const Tensor& x) {
  require(x.rank() == 4, "upsample2x: input must be N×C×H×W, got " + to_string(x.shape()));
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<double> out(nc * 4 * h * w);
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx) out[(i * 2 * h + y) * 2 * w + xx] = x[(i * h + y / 2) * w + xx / 2];
  return make_result({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), "upsample2x", {x.node()},
                     [nc, h, w](Node& self) {
                       Node& in = *self.parents[0];
                       if (!in.requires_grad) return;
                       auto& g = in.ensure_grad();
                       for (std::size_t i = 0; i < nc; ++i)
                         for (std::size_t y = 0; y < 2 * h; ++y)
                           for (std::size_t xx = 0; xx < 2 * w; ++xx)
                             g[(i * h + y / 2) * w + xx / 2] += self.grad[(i * 2 * h + y) * 2 * w + xx];
                     });
}

Tensor batch_stats_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  require(x.rank() == 2 || x.rank() == 4, "batch_stats_norm: input must be N×C or N×C×H×W");
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  require(gain.size() == c && shift.size() == c, "batch_stats_norm: affine params must have length C");
  const double count = static_cast<double>(n * inner);

  std::vector<double> xhat(x.size()), inv_sd(c), out(x.size());
  for (std::size_t j = 0; j < c; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) m += x[(i * c + j) * inner + k];
    m /= count;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) {
        const double d = x[(i * c + j) * inner + k] - m;
        var += d * d;
      }
    var /= count;
    inv_sd[j] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t idx = (i * c + j) * inner + k;
        xhat[idx] = (x[idx] - m) * inv_sd[j];
        out[idx] = gain[j] * xhat[idx] + shift[j];
      }
  }
  return make_result(
      x.shape(), std::move(out), "batch_stats_norm", {x.node(), gain.node(), shift.node()},
      [n, c, inner, count, xhat = std::move(xhat), inv_sd = std::move(inv_sd)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& ps = *self.parents[2];
        for (std::size_t j = 0; j < c; ++j) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < inner; ++k) {
              const std::size_t idx = (i * c + j) * inner + k;
              sum_dy += self.grad[idx];
              sum_dy_xhat += self.grad[idx] * xhat[idx];
            }
          if (pg.requires_grad) pg.ensure_grad()[j] += sum_dy_xhat;
          if (ps.requires_grad) ps.ensure_grad()[j] += sum_dy;
          if (px.requires_grad) {
            auto& g = px.ensure_grad();
            const double gj = pg.data[j];
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t k = 0; k < inner; ++k) {
                const std::size_t idx = (i * c + j) * inner + k;
                g[idx] += gj * inv_sd[j] / count *
                          (count * self.grad[idx] - sum_dy - xhat[idx] * sum_dy_xhat);
              }
          }
        }
      });
}

Tensor stop_gradient(const Tensor& x) { return x.detach(); }

Tensor sign(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] >= 0.0 ? 1.0 : -1.0;
  return Tensor(x.shape(), std::move(out));
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace bingan

#include "stgnrde/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stgnrde/error.hpp"

namespace stgnrde {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

thread_local bool g_grad_disabled = false;

using NodePtr = std::shared_ptr<detail::Node>;
using detail::Buffer;

void require_finite(const Buffer& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(t.shape()));
  }
}

Buffer& grad_buffer(detail::Node& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

bool wants_grad(const detail::Node& n) { return n.requires_grad; }

// Builds the result node and, when taping is active and any input tracks
// gradients, wires the backward closure and records the node.
Tensor make_result(Shape shape, Buffer value, const char* op,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(detail::Node&)> backward_fn) {
  require_finite(value, op);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool track = false;
  if (!g_grad_disabled) {
    for (const Tensor* t : inputs) track = track || t->requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->leaf = false;
    for (const Tensor* t : inputs) node->inputs.push_back(t->node());
    node->backward = std::move(backward_fn);
    Tape::active().record(node);
  }
  return Tensor(std::move(node));
}

enum class Broadcast { same, rhs_rows, lhs_rows };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (a.rank() == b.rank() && a.rank() >= 1) {
    bool tail_equal = std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1);
    if (tail_equal && b.dim(0) == 1) return Broadcast::rhs_rows;
    if (tail_equal && a.dim(0) == 1) return Broadcast::lhs_rows;
  }
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

// Shared driver for add/sub/mul.  `fwd` maps (x, y) -> z; `dx`, `dy` give the
// local partials at (x, y).
template <class Fwd, class Dx, class Dy>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Dx dx, Dy dy) {
  Broadcast kind = broadcast_kind(a, b, op);
  const Shape& out_shape = kind == Broadcast::lhs_rows ? b.shape() : a.shape();
  std::size_t n = shape_size(out_shape);
  std::size_t period = kind == Broadcast::rhs_rows ? b.size()
                       : kind == Broadcast::lhs_rows ? a.size()
                                                     : n;
  auto ia = [kind, period](std::size_t i) { return kind == Broadcast::lhs_rows ? i % period : i; };
  auto ib = [kind, period](std::size_t i) { return kind == Broadcast::rhs_rows ? i % period : i; };
  Buffer out(n);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[ia(i)], bv[ib(i)]);
  return make_result(out_shape, std::move(out), op, {&a, &b},
                     [n, ia, ib, dx, dy](detail::Node& self) {
                       auto& x = *self.inputs[0];
                       auto& y = *self.inputs[1];
                       if (wants_grad(x)) {
                         auto& g = grad_buffer(x);
                         for (std::size_t i = 0; i < n; ++i)
                           g[ia(i)] += self.grad[i] * dx(x.value[ia(i)], y.value[ib(i)]);
                       }
                       if (wants_grad(y)) {
                         auto& g = grad_buffer(y);
                         for (std::size_t i = 0; i < n; ++i)
                           g[ib(i)] += self.grad[i] * dy(x.value[ia(i)], y.value[ib(i)]);
                       }
                     });
}

// Unary op whose derivative is expressed through the input and output value.
template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  Buffer out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_result(a.shape(), std::move(out), op, {&a}, [deriv](detail::Node& self) {
    auto& x = *self.inputs[0];
    auto& g = grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * deriv(x.value[i], self.value[i]);
  });
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) { node_->value.assign(1, 0.0); }

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value.assign(data.begin(), data.end());
  require_finite(node->value, "tensor construction");
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw ContractError("only leaf tensors can be marked as parameters");
  node_->requires_grad = on;
  return *this;
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis out of range for " + shape_string(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }
std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() {
  if (!node_->leaf) throw ContractError("cannot mutate the output of a taped operation");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  require_rank(*this, 2, "at");
  return node_->value.at(row * dim(1) + col);
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  return from(shape(), std::vector<double>(node_->value.begin(), node_->value.end()));
}

// ---- Tape -----------------------------------------------------------------

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }

NoGradGuard::NoGradGuard() : previous_(g_grad_disabled) { g_grad_disabled = true; }
NoGradGuard::~NoGradGuard() { g_grad_disabled = previous_; }
bool NoGradGuard::enabled() { return g_grad_disabled; }

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad() || loss.node()->leaf) {
    throw ContractError("backward called on a loss that was not produced by taped operations");
  }
  Tape& tape = Tape::active();
  loss.node()->grad.assign(1, 1.0);
  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    detail::Node& n = **it;
    if (!n.grad.empty() && n.backward) n.backward(n);
    // Intermediate buffers are no longer needed once propagated.
    n.grad.clear();
    n.grad.shrink_to_fit();
    n.backward = nullptr;
    n.inputs.clear();
  }
  tape.clear();
}

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Buffer out(m * n);
  MapMat(out.data(), m, n).noalias() =
      ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
  return make_result({m, n}, std::move(out), "matmul", {&a, &b}, [m, k, n](detail::Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    ConstMapMat dz(self.grad.data(), m, n);
    if (wants_grad(x)) {
      MapMat(grad_buffer(x).data(), m, k).noalias() +=
          dz * ConstMapMat(y.value.data(), k, n).transpose();
    }
    if (wants_grad(y)) {
      MapMat(grad_buffer(y).data(), k, n).noalias() +=
          ConstMapMat(x.value.data(), m, k).transpose() * dz;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Buffer out(m * n);
  MapMat(out.data(), n, m) = ConstMapMat(a.data().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), "transpose", {&a}, [m, n](detail::Node& self) {
    auto& x = *self.inputs[0];
    MapMat(grad_buffer(x).data(), m, n) += ConstMapMat(self.grad.data(), n, m).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Buffer out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {&a}, [](detail::Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Buffer out(m * n);
  auto av = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = av.data() + r * n;
    double* o = out.data() + r * n;
    double peak = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += (o[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < n; ++c) o[c] /= total;
  }
  return make_result({m, n}, std::move(out), "softmax_rows", {&a}, [m, n](detail::Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t r = 0; r < m; ++r) {
      const double* y = self.value.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (dy[c] - dot);
    }
  });
}

Tensor sum(const Tensor& a) {
  auto av = a.data();
  double total = std::accumulate(av.begin(), av.end(), 0.0);
  return make_result({}, {total}, "sum", {&a}, [](detail::Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (double& x : g) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, Activation act) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(1);
  if (weight.dim(0) != in || bias.size() != out_dim) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + ", weight " +
                         shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  Buffer out(rows * out_dim);
  MapMat y(out.data(), rows, out_dim);
  y.noalias() = ConstMapMat(x.data().data(), rows, in) * ConstMapMat(weight.data().data(), in, out_dim);
  y.rowwise() += ConstMapMat(bias.data().data(), 1, out_dim).row(0);
  if (act == Activation::relu) {
    y = y.cwiseMax(0.0);
  } else if (act == Activation::tanh) {
    y = y.array().tanh();
  }
  return make_result(
      {rows, out_dim}, std::move(out), "linear", {&x, &weight, &bias},
      [rows, in, out_dim, act](detail::Node& self) {
        RowMat dz = ConstMapMat(self.grad.data(), rows, out_dim);
        ConstMapMat yv(self.value.data(), rows, out_dim);
        if (act == Activation::relu) {
          dz = (yv.array() > 0.0).select(dz, 0.0);
        } else if (act == Activation::tanh) {
          dz.array() *= 1.0 - yv.array().square();
        }
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        if (wants_grad(xn)) {
          MapMat(grad_buffer(xn).data(), rows, in).noalias() +=
              dz * ConstMapMat(wn.value.data(), in, out_dim).transpose();
        }
        if (wants_grad(wn)) {
          MapMat(grad_buffer(wn).data(), in, out_dim).noalias() +=
              ConstMapMat(xn.value.data(), rows, in).transpose() * dz;
        }
        if (wants_grad(bn)) {
          MapMat(grad_buffer(bn).data(), 1, out_dim) += dz.colwise().sum();
        }
      });
}

Tensor row_matvec(const Tensor& g, const Tensor& x) {
  require_rank(g, 2, "row_matvec");
  require_rank(x, 2, "row_matvec");
  const std::size_t rows = g.dim(0), n = x.dim(1);
  if (x.dim(0) != rows || n == 0 || g.dim(1) % n != 0) {
    throw DimensionError("row_matvec: " + shape_string(g.shape()) + " against " +
                         shape_string(x.shape()));
  }
  const std::size_t m = g.dim(1) / n;
  Buffer out(rows * m);
  auto gv = g.data();
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    Eigen::Map<Eigen::VectorXd>(out.data() + r * m, m).noalias() =
        ConstMapMat(gv.data() + r * m * n, m, n) *
        Eigen::Map<const Eigen::VectorXd>(xv.data() + r * n, n);
  }
  return make_result({rows, m}, std::move(out), "row_matvec", {&g, &x},
                     [rows, m, n](detail::Node& self) {
                       auto& gn = *self.inputs[0];
                       auto& xn = *self.inputs[1];
                       for (std::size_t r = 0; r < rows; ++r) {
                         Eigen::Map<const Eigen::VectorXd> dy(self.grad.data() + r * m, m);
                         if (wants_grad(gn)) {
                           MapMat(grad_buffer(gn).data() + r * m * n, m, n).noalias() +=
                               dy * Eigen::Map<const Eigen::RowVectorXd>(xn.value.data() + r * n, n);
                         }
                         if (wants_grad(xn)) {
                           Eigen::Map<Eigen::VectorXd>(grad_buffer(xn).data() + r * n, n).noalias() +=
                               ConstMapMat(gn.value.data() + r * m * n, m, n).transpose() * dy;
                         }
                       }
                     });
}

Tensor graph_mix(const Tensor& adjacency, const Tensor& x) {
  require_rank(adjacency, 2, "graph_mix");
  require_rank(x, 2, "graph_mix");
  const std::size_t v = adjacency.dim(0), k = x.dim(1);
  if (adjacency.dim(1) != v || v == 0 || x.dim(0) % v != 0) {
    throw DimensionError("graph_mix: adjacency " + shape_string(adjacency.shape()) +
                         " against " + shape_string(x.shape()));
  }
  const std::size_t blocks = x.dim(0) / v;
  Buffer out(x.size());
  ConstMapMat a(adjacency.data().data(), v, v);
  for (std::size_t b = 0; b < blocks; ++b) {
    MapMat(out.data() + b * v * k, v, k).noalias() = a * ConstMapMat(x.data().data() + b * v * k, v, k);
  }
  return make_result(x.shape(), std::move(out), "graph_mix", {&adjacency, &x},
                     [v, k, blocks](detail::Node& self) {
                       auto& an = *self.inputs[0];
                       auto& xn = *self.inputs[1];
                       for (std::size_t b = 0; b < blocks; ++b) {
                         ConstMapMat dy(self.grad.data() + b * v * k, v, k);
                         if (wants_grad(an)) {
                           MapMat(grad_buffer(an).data(), v, v).noalias() +=
                               dy * ConstMapMat(xn.value.data() + b * v * k, v, k).transpose();
                         }
                         if (wants_grad(xn)) {
                           MapMat(grad_buffer(xn).data() + b * v * k, v, k).noalias() +=
                               ConstMapMat(an.value.data(), v, v).transpose() * dy;
                         }
                       }
                     });
}

Tensor block_mix(const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "block_mix");
  require_rank(x, 2, "block_mix");
  const std::size_t v = a.dim(1), k = x.dim(1);
  if (v == 0 || a.dim(0) != x.dim(0) || x.dim(0) % v != 0) {
    throw DimensionError("block_mix: " + shape_string(a.shape()) + " against " +
                         shape_string(x.shape()));
  }
  const std::size_t blocks = x.dim(0) / v;
  Buffer out(x.size());
  for (std::size_t b = 0; b < blocks; ++b) {
    MapMat(out.data() + b * v * k, v, k).noalias() =
        ConstMapMat(a.data().data() + b * v * v, v, v) * ConstMapMat(x.data().data() + b * v * k, v, k);
  }
  return make_result(x.shape(), std::move(out), "block_mix", {&a, &x},
                     [v, k, blocks](detail::Node& self) {
                       auto& an = *self.inputs[0];
                       auto& xn = *self.inputs[1];
                       for (std::size_t b = 0; b < blocks; ++b) {
                         ConstMapMat dy(self.grad.data() + b * v * k, v, k);
                         if (wants_grad(an)) {
                           MapMat(grad_buffer(an).data() + b * v * v, v, v).noalias() +=
                               dy * ConstMapMat(xn.value.data() + b * v * k, v, k).transpose();
                         }
                         if (wants_grad(xn)) {
                           MapMat(grad_buffer(xn).data() + b * v * k, v, k).noalias() +=
                               ConstMapMat(an.value.data() + b * v * v, v, v).transpose() * dy;
                         }
                       }
                     });
}

Tensor outer_sum_blocks(const Tensor& s1, const Tensor& s2, std::size_t block) {
  if (s1.shape() != s2.shape() || s1.rank() != 2 || s1.dim(1) != 1 || block == 0 ||
      s1.dim(0) % block != 0) {
    throw DimensionError("outer_sum_blocks: " + shape_string(s1.shape()) + " and " +
                         shape_string(s2.shape()) + " with block " + std::to_string(block));
  }
  const std::size_t rows = s1.dim(0), blocks = rows / block;
  Buffer out(rows * block);
  auto a = s1.data();
  auto b = s2.data();
  for (std::size_t blk = 0; blk < blocks; ++blk)
    for (std::size_t i = 0; i < block; ++i)
      for (std::size_t j = 0; j < block; ++j)
        out[(blk * block + i) * block + j] = a[blk * block + i] + b[blk * block + j];
  return make_result({rows, block}, std::move(out), "outer_sum_blocks", {&s1, &s2},
                     [block, blocks](detail::Node& self) {
                       auto& an = *self.inputs[0];
                       auto& bn = *self.inputs[1];
                       for (std::size_t blk = 0; blk < blocks; ++blk)
                         for (std::size_t i = 0; i < block; ++i)
                           for (std::size_t j = 0; j < block; ++j) {
                             double g = self.grad[(blk * block + i) * block + j];
                             if (wants_grad(an)) grad_buffer(an)[blk * block + i] += g;
                             if (wants_grad(bn)) grad_buffer(bn)[blk * block + j] += g;
                           }
                     });
}

}  // namespace stgnrde

#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Every op checks shapes at entry and rejects non-finite results at exit.
// When any input tracks gradients (and no NoGradGuard is alive on the
// calling thread) the result is recorded on the thread-local Tape together
// with a closure that pushes its gradient back to the inputs.  backward()
// replays the tape in reverse creation order, which is a reverse topological
// order of the graph.

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace stgnrde {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// 64-byte aligned storage.  Eigen picks its vectorized head/tail split from
// the buffer address, so aligned buffers keep reductions bit-reproducible
// from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty means "no gradient"
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  static Tensor eye(std::size_t n);

  // Marks a leaf tensor as a trainable parameter.
  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const;

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  // Only leaves may be mutated in place (optimizer updates, test hooks).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Untracked copy of the values.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

class Tape {
 public:
  static Tape& active();

  void record(std::shared_ptr<detail::Node> node);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  friend void backward(const Tensor& loss);
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

// Disables taping on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool enabled();

 private:
  bool previous_;
};

// Populates grad() of every tracked leaf reachable from `loss` and clears the
// tape.  Gradients accumulate into leaves across calls until zero_grad().
void backward(const Tensor& loss);

enum class Activation { none, relu, tanh };

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Elementwise with broadcasting limited to a leading extent of 1
// (e.g. [m,n] op [1,n]).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor abs(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// act(x * weight + bias) for x [rows, in], weight [in, out], bias [1, out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Activation act = Activation::none);

// Per-row matrix-vector product: g [rows, m*n] viewed as rows of m x n
// matrices, x [rows, n]; returns [rows, m].
Tensor row_matvec(const Tensor& g, const Tensor& x);

// Applies one shared [v, v] matrix to each of the blocks of x [b*v, k].
Tensor graph_mix(const Tensor& adjacency, const Tensor& x);

// Applies per-block matrices a [b*v, v] to the matching blocks of x [b*v, k].
Tensor block_mix(const Tensor& a, const Tensor& x);

// out[b*v + i, j] = s1[b*v + i] + s2[b*v + j] for column vectors s1, s2.
Tensor outer_sum_blocks(const Tensor& s1, const Tensor& s2, std::size_t block);

}  // namespace stgnrde

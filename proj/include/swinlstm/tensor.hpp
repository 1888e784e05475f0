#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swinlstm/errors.hpp"
#include "swinlstm/rng.hpp"

// Dense row-major tensors with reverse-mode autodiff. Ops are free functions
// that take the Tape recording the current forward pass; backward() replays
// the recorded rules in reverse and deposits gradients on the leaf tensors.
// Tensors are handles: copies share the same buffer, which is what lets a
// parameter registry and the layers that own the parameter see one value.

namespace swinlstm {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from_data(Shape shape, std::vector<T> values);
  static Tensor scalar_value(T v);  // rank 0

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int axis) const { return impl_->shape[axis]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->values.size()); }

  std::span<const T> data() const { return impl_->values; }
  std::span<T> data() { return impl_->values; }

  T item() const;
  T at(std::initializer_list<std::int64_t> idx) const;
  void set_at(std::initializer_list<std::int64_t> idx, T v);

  Tensor& set_requires_grad(bool rg = true) {
    impl_->requires_grad = rg;
    return *this;
  }
  bool requires_grad() const { return impl_->requires_grad; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Empty span until a backward pass touches this tensor.
  std::span<const T> grad() const { return impl_->grad; }
  // Gradient buffer for accumulation; allocated zero-filled on first use.
  std::span<T> grad_accum() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T(0));
    return impl_->grad;
  }
  // Gradient as a detached tensor; zeros when no gradient was deposited.
  Tensor grad_tensor() const;
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy, detached from any grad bookkeeping.
  Tensor clone() const;
  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(impl_->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(impl_->values[i]);
    return Tensor<U>::from_data(impl_->shape, std::move(out));
  }

  bool same_buffer(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Records one forward pass. Nodes are appended in execution order, which is
// a topological order of the graph, so backward() is a single reverse sweep.
// One tape per forward pass; it is cleared after backward. Confined to one
// thread; independent tapes may run on parallel threads.
template <typename T>
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  // When on, every op scans its outputs and throws NonFiniteError.
  void set_finite_checks(bool on) { finite_checks_ = on; }
  bool finite_checks() const { return finite_checks_; }

  std::size_t node_count() const { return nodes_.size(); }

  // Registers a backward rule when grad is enabled and any input requires
  // grad; outputs are then marked requires_grad. Returns whether recorded.
  bool record(const char* name, std::initializer_list<Tensor<T>> inputs,
              std::initializer_list<Tensor<T>> outputs, std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1, runs the reverse sweep, then clears the tape.
  void backward(const Tensor<T>& loss);

  void clear() { nodes_.clear(); }

  // Self-test hook: scales the output gradient of every node with the given
  // op name before its backward rule runs, corrupting the analytic gradient.
  void inject_backward_fault(std::string op_name, T grad_scale) {
    fault_op_ = std::move(op_name);
    fault_scale_ = grad_scale;
  }

 private:
  struct Node {
    const char* name;
    std::vector<Tensor<T>> outputs;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool finite_checks_ = false;
  std::string fault_op_;
  T fault_scale_ = T(1);
};

// ---- Op suite -------------------------------------------------------------
// Binary elementwise ops broadcast trailing-aligned (a dim of 1 stretches);
// gradients for broadcast inputs are reduced back over the stretched axes.

template <typename T> Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T s);
template <typename T> Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x);

// Batched matmul: (..., m, k) x (..., k, n); b may be rank 2 to share one
// right-hand matrix over all leading batch dims.
template <typename T> Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> concat(Tape<T>& tape, std::span<const Tensor<T>> parts, int axis);
template <typename T> std::vector<Tensor<T>> split(Tape<T>& tape, const Tensor<T>& x, int axis, int parts);
// One entry of -1 is inferred from the element count.
template <typename T> Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, std::span<const int> axes);

// Full reductions to a rank-0 scalar, summed in ascending index order.
template <typename T> Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);
// Per-row mean of a rank-2 tensor; keeps each row's reduction order fixed
// regardless of how rows are later combined.
template <typename T> Tensor<T> row_mean(Tape<T>& tape, const Tensor<T>& x);

template <typename T> Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x);
// tanh approximation of GELU.
template <typename T> Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, int axis);
// Normalizes the last axis; gamma/beta are learned (D,) vectors.
template <typename T> Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x,
                                           const Tensor<T>& gamma, const Tensor<T>& beta,
                                           T eps = T(1e-5));

// x (..., in) * w (in, out) [+ b (out,)] -> (..., out)
template <typename T> Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w);
template <typename T> Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w,
                                       const Tensor<T>& b);

// Inverted dropout; identity when train is false or p == 0.
template <typename T> Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, bool train,
                                        Rng& rng);

// out[r] = table[rows[r]]; backward scatter-adds into the table rows.
template <typename T> Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table,
                                            std::shared_ptr<const std::vector<std::int64_t>> rows);

// Pure data movement: out.flat[i] = x.flat[(*map)[i]]. The map must reference
// valid flat indices; when it is a bijection the backward scatter is exact.
template <typename T> Tensor<T> index_map(Tape<T>& tape, const Tensor<T>& x,
                                          std::shared_ptr<const std::vector<std::int64_t>> map,
                                          Shape out_shape, const char* name);

// ---- Gradient checking ------------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool ok = false;
};

// Compares the analytic gradient of f against central finite differences at
// every component of x. Non-scalar outputs are contracted with a fixed
// pseudorandom cotangent. Runs f twice up front and raises Error if the two
// forward passes are not bit-identical.
GradCheckResult grad_check(const std::function<Tensor<double>(Tape<double>&, Tensor<double>&)>& f,
                           Tensor<double> x, double eps = 1e-5, double tol = 1e-5);

// Same comparison for a closure over many leaves (model parameters and
// inputs): one backward pass, then in-place central differences per leaf
// component. forward must return a scalar and read the leaves' current data.
GradCheckResult grad_check_leaves(const std::function<Tensor<double>(Tape<double>&)>& forward,
                                  std::span<Tensor<double>> leaves, double eps = 1e-5,
                                  double tol = 1e-5);

}  // namespace swinlstm

#include "swinlstm/detail/tensor_ops.hpp"

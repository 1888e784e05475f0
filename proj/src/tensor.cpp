#include "swinlstm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "swinlstm/kernels.hpp"

namespace swinlstm {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

namespace {

std::int64_t checked_flat_index(const Shape& shape, std::initializer_list<std::int64_t> idx) {
  if (idx.size() != shape.size())
    throw Error("index rank " + std::to_string(idx.size()) + " does not match tensor rank " +
                std::to_string(shape.size()));
  std::int64_t flat = 0;
  std::size_t ax = 0;
  for (auto i : idx) {
    if (i < 0 || i >= shape[ax])
      throw Error("index " + std::to_string(i) + " out of range for axis " + std::to_string(ax) +
                  " of " + shape_str(shape));
    flat = flat * shape[ax] + i;
    ++ax;
  }
  return flat;
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  std::int64_t n = shape_numel(shape);
  t.impl_->shape = std::move(shape);
  t.impl_->values.assign(static_cast<std::size_t>(n), T(0));
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.impl_->values.begin(), t.impl_->values.end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> values) {
  std::int64_t n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size()))
    throw Error("from_data: " + std::to_string(values.size()) + " values for shape " +
                shape_str(shape));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar_value(T v) {
  return from_data({}, {v});
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw Error("item: tensor has shape " + shape_str(shape()));
  return impl_->values[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::int64_t> idx) const {
  return impl_->values[checked_flat_index(impl_->shape, idx)];
}

template <typename T>
void Tensor<T>::set_at(std::initializer_list<std::int64_t> idx, T v) {
  impl_->values[checked_flat_index(impl_->shape, idx)] = v;
}

template <typename T>
Tensor<T> Tensor<T>::grad_tensor() const {
  if (impl_->grad.empty()) return zeros(impl_->shape);
  return from_data(impl_->shape, impl_->grad);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return from_data(impl_->shape, impl_->values);
}

// ---- Tape ---------------------------------------------------------------------

template <typename T>
bool Tape<T>::record(const char* name, std::initializer_list<Tensor<T>> inputs,
                     std::initializer_list<Tensor<T>> outputs,
                     std::function<void()> backward_fn) {
  if (!grad_enabled_) return false;
  bool any = false;
  for (const auto& in : inputs)
    if (in.defined() && in.requires_grad()) {
      any = true;
      break;
    }
  if (!any) return false;
  for (auto out : outputs) out.set_requires_grad(true);
  nodes_.push_back(Node{name, std::vector<Tensor<T>>(outputs), std::move(backward_fn)});
  return true;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw Error(std::string("backward: loss must be a scalar, got ") +
                (loss.defined() ? shape_str(loss.shape()) : std::string("undefined tensor")));
  if (nodes_.empty()) throw Error("backward: tape is empty");
  Tensor<T> l = loss;
  auto g = l.grad_accum();
  std::fill(g.begin(), g.end(), T(0));
  g[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!fault_op_.empty() && fault_op_ == it->name) {
      for (auto& out : it->outputs) {
        if (!out.has_grad()) continue;
        auto og = out.grad_accum();
        for (auto& v : og) v *= fault_scale_;
      }
    }
    it->backward();
  }
  clear();
}

// ---- Gradient checking --------------------------------------------------------

namespace {

bool bit_identical(const Tensor<double>& a, const Tensor<double>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

double rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>(Tape<double>&, Tensor<double>&)>& f,
                           Tensor<double> x, double eps, double tol) {
  x.set_requires_grad(true);
  x.zero_grad();

  Tape<double> t0(false);
  Tensor<double> y0 = f(t0, x);
  Tape<double> t1(false);
  Tensor<double> y1 = f(t1, x);
  if (!bit_identical(y0, y1))
    throw Error("grad_check: function is not deterministic (two forward passes disagree)");

  // Fixed cotangent, bounded away from zero, so sign errors cannot cancel.
  Tensor<double> r;
  if (y0.numel() == 1) {
    r = Tensor<double>::full(y0.shape(), 1.0);
  } else {
    Rng rng = Rng::from_seed(0x5EED, "grad_check.cotangent");
    std::vector<double> rv(y0.numel());
    for (auto& v : rv) {
      const double u = rng.uniform(-1.0, 1.0);
      v = u < 0 ? u - 0.5 : u + 0.5;
    }
    r = Tensor<double>::from_data(y0.shape(), std::move(rv));
  }

  auto eval_loss = [&]() -> double {
    Tape<double> t(false);
    Tensor<double> y = f(t, x);
    double acc = 0.0;
    const auto yv = y.data();
    const auto rv = r.data();
    for (std::size_t i = 0; i < yv.size(); ++i) acc += yv[i] * rv[i];
    return acc;
  };

  Tape<double> tg(true);
  Tensor<double> y = f(tg, x);
  Tensor<double> loss = sum(tg, mul(tg, y, r));
  Tensor<double> analytic;
  if (tg.node_count() == 0) {
    // f never touched x (constant function): analytic gradient is zero.
    analytic = Tensor<double>::zeros(x.shape());
  } else {
    tg.backward(loss);
    analytic = x.grad_tensor();
    x.zero_grad();
  }

  GradCheckResult res;
  auto xv = x.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double orig = xv[i];
    xv[i] = orig + eps;
    const double lp = eval_loss();
    xv[i] = orig - eps;
    const double lm = eval_loss();
    xv[i] = orig;
    const double numeric = (lp - lm) / (2.0 * eps);
    res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic.data()[i], numeric));
  }
  res.ok = res.max_rel_err <= tol;
  return res;
}

GradCheckResult grad_check_leaves(const std::function<Tensor<double>(Tape<double>&)>& forward,
                                  std::span<Tensor<double>> leaves, double eps, double tol) {
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  auto eval = [&]() -> double {
    Tape<double> t(false);
    Tensor<double> y = forward(t);
    if (y.numel() != 1)
      throw Error("grad_check_leaves: forward must return a scalar, got " + shape_str(y.shape()));
    return y.item();
  };
  const double v0 = eval();
  const double v1 = eval();
  if (std::memcmp(&v0, &v1, sizeof(double)) != 0)
    throw Error("grad_check: function is not deterministic (two forward passes disagree)");

  Tape<double> tg(true);
  Tensor<double> loss = forward(tg);
  if (loss.numel() != 1)
    throw Error("grad_check_leaves: forward must return a scalar, got " + shape_str(loss.shape()));
  if (tg.node_count() > 0) tg.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) {
    auto g = leaf.grad();
    analytic.emplace_back(g.empty() ? std::vector<double>(leaf.numel(), 0.0)
                                    : std::vector<double>(g.begin(), g.end()));
    leaf.zero_grad();
  }

  GradCheckResult res;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto lv = leaves[li].data();
    for (std::int64_t i = 0; i < leaves[li].numel(); ++i) {
      const double orig = lv[i];
      lv[i] = orig + eps;
      const double lp = eval();
      lv[i] = orig - eps;
      const double lm = eval();
      lv[i] = orig;
      const double numeric = (lp - lm) / (2.0 * eps);
      res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic[li][i], numeric));
    }
  }
  res.ok = res.max_rel_err <= tol;
  return res;
}

// ---- Explicit instantiations -----------------------------------------------

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;



}  // namespace swinlstm

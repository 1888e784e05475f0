#pragma once

// Implementation detail of tensor.hpp: the op templates and their backward
// rules. Included at the bottom of tensor.hpp; do not include directly.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <utility>
#include <vector>

#include "swinlstm/kernels.hpp"

namespace swinlstm {

namespace detail {

// Strides of `in` right-aligned to `out`; 0 where a dim of 1 broadcasts.
inline std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::int64_t> strides(out.size(), 0);
  std::int64_t acc = 1;
  int off = static_cast<int>(out.size()) - static_cast<int>(in.size());
  for (int ax = static_cast<int>(in.size()) - 1; ax >= 0; --ax) {
    if (in[ax] != 1) strides[ax + off] = acc;
    acc *= in[ax];
  }
  return strides;
}

inline Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) throw ShapeError(op, shape_str(a), shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Walks flat output indices with matching offsets into two broadcast inputs.
template <typename F>
void broadcast_walk(const Shape& out, const std::vector<std::int64_t>& sa,
                    const std::vector<std::int64_t>& sb, F&& f) {
  const std::int64_t n = shape_numel(out);
  const int r = static_cast<int>(out.size());
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (int ax = r - 1; ax >= 0; --ax) {
      ++idx[ax];
      ia += sa[ax];
      ib += sb[ax];
      if (idx[ax] < out[ax]) break;
      ia -= sa[ax] * out[ax];
      ib -= sb[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

template <typename T>
void maybe_check_finite(Tape<T>& tape, const Tensor<T>& t, const char* op) {
  if (!tape.finite_checks()) return;
  for (T v : t.data())
    if (!std::isfinite(v)) throw NonFiniteError(op);
}

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape();
}

// dfdx(x, y) is evaluated during the backward sweep; y is the forward output.
template <typename T, typename FwdF, typename BwdF>
Tensor<T> unary_op(Tape<T>& tape, const char* name, const Tensor<T>& x, FwdF&& fwd, BwdF&& dfdx) {
  const auto xs = x.data();
  std::vector<T> out(xs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xs[i]);
  Tensor<T> y = Tensor<T>::from_data(x.shape(), std::move(out));
  tape.record(name, {x}, {y}, [x = x, y, dfdx]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    auto xv = x.data();
    auto yv = y.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dfdx(xv[i], yv[i]);
  });
  maybe_check_finite(tape, y, name);
  return y;
}

enum class BinKind { add, sub, mul };

template <typename T>
Tensor<T> binary_op(Tape<T>& tape, BinKind kind, const Tensor<T>& a, const Tensor<T>& b) {
  const char* name = kind == BinKind::add ? "add" : kind == BinKind::sub ? "sub" : "mul";
  Tensor<T> y;
  const bool same = same_shape(a, b);
  if (same) {
    y = Tensor<T>::zeros(a.shape());
    const std::size_t n = a.data().size();
    switch (kind) {
      case BinKind::add: kernels::add(a.data().data(), b.data().data(), y.data().data(), n); break;
      case BinKind::sub: kernels::sub(a.data().data(), b.data().data(), y.data().data(), n); break;
      case BinKind::mul: kernels::mul(a.data().data(), b.data().data(), y.data().data(), n); break;
    }
  } else {
    Shape os = broadcast_shape(name, a.shape(), b.shape());
    auto sa = broadcast_strides(a.shape(), os);
    auto sb = broadcast_strides(b.shape(), os);
    y = Tensor<T>::zeros(os);
    auto yv = y.data();
    auto av = a.data();
    auto bv = b.data();
    switch (kind) {
      case BinKind::add:
        broadcast_walk(os, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
          yv[i] = av[ia] + bv[ib];
        });
        break;
      case BinKind::sub:
        broadcast_walk(os, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
          yv[i] = av[ia] - bv[ib];
        });
        break;
      case BinKind::mul:
        broadcast_walk(os, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
          yv[i] = av[ia] * bv[ib];
        });
        break;
    }
  }
  tape.record(name, {a, b}, {y}, [kind, a = a, b = b, y, same]() mutable {
    if (!y.has_grad()) return;
    auto gy = y.grad();
    const bool ga_on = a.requires_grad();
    const bool gb_on = b.requires_grad();
    if (same) {
      const std::size_t n = gy.size();
      if (ga_on) {
        auto ga = a.grad_accum();
        if (kind == BinKind::mul) {
          auto bv = b.data();
          for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * bv[i];
        } else {
          kernels::axpy(T(1), gy.data(), ga.data(), n);
        }
      }
      if (gb_on) {
        auto gb = b.grad_accum();
        if (kind == BinKind::mul) {
          auto av = a.data();
          for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i] * av[i];
        } else {
          kernels::axpy(kind == BinKind::sub ? T(-1) : T(1), gy.data(), gb.data(), n);
        }
      }
      return;
    }
    const Shape& os = y.shape();
    auto sa = broadcast_strides(a.shape(), os);
    auto sb = broadcast_strides(b.shape(), os);
    auto ga = ga_on ? a.grad_accum() : std::span<T>{};
    auto gb = gb_on ? b.grad_accum() : std::span<T>{};
    auto av = a.data();
    auto bv = b.data();
    broadcast_walk(os, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      switch (kind) {
        case BinKind::add:
          if (ga_on) ga[ia] += gy[i];
          if (gb_on) gb[ib] += gy[i];
          break;
        case BinKind::sub:
          if (ga_on) ga[ia] += gy[i];
          if (gb_on) gb[ib] -= gy[i];
          break;
        case BinKind::mul:
          if (ga_on) ga[ia] += gy[i] * bv[ib];
          if (gb_on) gb[ib] += gy[i] * av[ia];
          break;
      }
    });
  });
  maybe_check_finite(tape, y, name);
  return y;
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op(tape, detail::BinKind::add, a, b);
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op(tape, detail::BinKind::sub, a, b);
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op(tape, detail::BinKind::mul, a, b);
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T s) {
  Tensor<T> y = Tensor<T>::zeros(x.shape());
  kernels::scale(x.data().data(), s, y.data().data(), x.data().size());
  tape.record("scale", {x}, {y}, [x = x, y, s]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    kernels::axpy(s, gy.data(), gx.data(), gx.size());
  });
  detail::maybe_check_finite(tape, y, "scale");
  return y;
}

template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary_op(
      tape, "abs", x, [](T v) { return v < T(0) ? -v : v; },
      [](T v, T) { return v > T(0) ? T(1) : v < T(0) ? T(-1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary_op(
      tape, "sigmoid", x,
      [](T v) {
        if (v >= T(0)) {
          T e = std::exp(-v);
          return T(1) / (T(1) + e);
        }
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary_op(
      tape, "tanh", x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
  constexpr T k = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T c = T(0.044715);
  return detail::unary_op(
      tape, "gelu", x,
      [](T v) {
        T u = k * (v + c * v * v * v);
        return T(0.5) * v * (T(1) + std::tanh(u));
      },
      [](T v, T) {
        T u = k * (v + c * v * v * v);
        T th = std::tanh(u);
        T sech2 = T(1) - th * th;
        return T(0.5) * (T(1) + th) + T(0.5) * v * sech2 * k * (T(1) + T(3) * c * v * v);
      });
}

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul", shape_str(a.shape()), shape_str(b.shape()));
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const std::int64_t m = as[as.size() - 2];
  const std::int64_t k = as[as.size() - 1];
  const std::int64_t n = bs[bs.size() - 1];
  const bool shared_b = b.rank() == 2 && a.rank() > 2;
  if (bs[bs.size() - 2] != k) throw ShapeError("matmul", shape_str(as), shape_str(bs));
  if (!shared_b) {
    if (as.size() != bs.size()) throw ShapeError("matmul", shape_str(as), shape_str(bs));
    for (std::size_t i = 0; i + 2 < as.size(); ++i)
      if (as[i] != bs[i]) throw ShapeError("matmul", shape_str(as), shape_str(bs));
  }
  Shape os(as.begin(), as.end() - 2);
  os.push_back(m);
  os.push_back(n);
  const std::int64_t batch = shape_numel(os) / (m * n);
  Tensor<T> y = Tensor<T>::zeros(os);
  {
    const T* ap = a.data().data();
    const T* bp = b.data().data();
    T* yp = y.data().data();
    for (std::int64_t i = 0; i < batch; ++i)
      kernels::gemm_nn(m, n, k, ap + i * m * k, shared_b ? bp : bp + i * k * n, yp + i * m * n,
                       false);
  }
  tape.record("matmul", {a, b}, {y}, [a = a, b = b, y, m, n, k, batch, shared_b]() mutable {
    if (!y.has_grad()) return;
    auto gy = y.grad();
    const T* ap = a.data().data();
    const T* bp = b.data().data();
    if (a.requires_grad()) {
      auto ga = a.grad_accum();
      for (std::int64_t i = 0; i < batch; ++i)
        kernels::gemm_nt(m, k, n, gy.data() + i * m * n, shared_b ? bp : bp + i * k * n,
                         ga.data() + i * m * k, true);
    }
    if (b.requires_grad()) {
      auto gb = b.grad_accum();
      for (std::int64_t i = 0; i < batch; ++i)
        kernels::gemm_tn(k, n, m, ap + i * m * k, gy.data() + i * m * n,
                         shared_b ? gb.data() : gb.data() + i * k * n, true);
    }
  });
  detail::maybe_check_finite(tape, y, "matmul");
  return y;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, std::span<const Tensor<T>> parts, int axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  const int r = parts[0].rank();
  if (axis < 0 || axis >= r) throw Error("concat: axis " + std::to_string(axis) + " out of range");
  Shape os = parts[0].shape();
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) throw ShapeError("concat", shape_str(parts[0].shape()), shape_str(p.shape()));
    for (int ax = 0; ax < r; ++ax)
      if (ax != axis && p.shape()[ax] != os[ax])
        throw ShapeError("concat", shape_str(parts[0].shape()), shape_str(p.shape()));
    total += p.dim(axis);
  }
  os[axis] = total;
  std::int64_t outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= os[ax];
  for (int ax = axis + 1; ax < r; ++ax) inner *= os[ax];

  Tensor<T> y = Tensor<T>::zeros(os);
  {
    T* yp = y.data().data();
    const std::int64_t out_slab = total * inner;
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      const std::int64_t slab = p.dim(axis) * inner;
      const T* pp = p.data().data();
      for (std::int64_t o = 0; o < outer; ++o)
        std::memcpy(yp + o * out_slab + offset, pp + o * slab, slab * sizeof(T));
      offset += slab;
    }
  }
  std::vector<Tensor<T>> held(parts.begin(), parts.end());
  bool any = false;
  for (const auto& p : held)
    if (p.requires_grad()) any = true;
  if (any && tape.grad_enabled()) {
    // record() needs an initializer_list of inputs; one representative input
    // that requires grad is enough to trigger recording.
    Tensor<T> rep;
    for (const auto& p : held)
      if (p.requires_grad()) {
        rep = p;
        break;
      }
    tape.record("concat", {rep}, {y}, [held, y, outer, inner, total]() mutable {
      if (!y.has_grad()) return;
      auto gy = y.grad();
      const std::int64_t out_slab = total * inner;
      std::int64_t offset = 0;
      for (auto& p : held) {
        const std::int64_t axis_len = p.numel() / std::max<std::int64_t>(outer * inner, 1);
        const std::int64_t slab = axis_len * inner;
        if (p.requires_grad()) {
          auto gp = p.grad_accum();
          for (std::int64_t o = 0; o < outer; ++o)
            kernels::axpy(T(1), gy.data() + o * out_slab + offset, gp.data() + o * slab,
                          static_cast<std::size_t>(slab));
        }
        offset += slab;
      }
    });
  }
  detail::maybe_check_finite(tape, y, "concat");
  return y;
}

template <typename T>
std::vector<Tensor<T>> split(Tape<T>& tape, const Tensor<T>& x, int axis, int parts) {
  const int r = x.rank();
  if (axis < 0 || axis >= r) throw Error("split: axis " + std::to_string(axis) + " out of range");
  if (parts <= 0 || x.dim(axis) % parts != 0)
    throw Error("split: axis extent " + std::to_string(x.dim(axis)) + " not divisible into " +
                std::to_string(parts) + " parts");
  const std::int64_t axis_len = x.dim(axis) / parts;
  std::int64_t outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= x.dim(ax);
  for (int ax = axis + 1; ax < r; ++ax) inner *= x.dim(ax);
  const std::int64_t slab = axis_len * inner;
  const std::int64_t in_slab = x.dim(axis) * inner;

  Shape ps = x.shape();
  ps[axis] = axis_len;
  std::vector<Tensor<T>> outs;
  outs.reserve(parts);
  const T* xp = x.data().data();
  for (int pi = 0; pi < parts; ++pi) {
    Tensor<T> p = Tensor<T>::zeros(ps);
    T* pp = p.data().data();
    for (std::int64_t o = 0; o < outer; ++o)
      std::memcpy(pp + o * slab, xp + o * in_slab + pi * slab, slab * sizeof(T));
    outs.push_back(std::move(p));
  }
  if (tape.grad_enabled() && x.requires_grad()) {
    std::vector<Tensor<T>> held = outs;
    for (auto out : held) out.set_requires_grad(true);
    tape.record("split", {x}, {held[0]}, [x = x, held, outer, inner, slab, in_slab]() mutable {
      auto gx = x.grad_accum();
      for (std::size_t pi = 0; pi < held.size(); ++pi) {
        if (!held[pi].has_grad()) continue;
        auto gp = held[pi].grad();
        for (std::int64_t o = 0; o < outer; ++o)
          kernels::axpy(T(1), gp.data() + o * slab,
                        gx.data() + o * in_slab + std::int64_t(pi) * slab,
                        static_cast<std::size_t>(slab));
      }
    });
    // Every split output participates in the graph, not just held[0].
    for (auto out : outs) out.set_requires_grad(true);
  }
  for (const auto& p : outs) detail::maybe_check_finite(tape, p, "split");
  return outs;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw Error("reshape: more than one -1 in " + shape_str(shape));
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0)
      throw ShapeError("reshape", shape_str(x.shape()), shape_str(shape));
    shape[infer] = x.numel() / known;
  }
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape", shape_str(x.shape()), shape_str(shape));
  Tensor<T> y = Tensor<T>::from_data(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  tape.record("reshape", {x}, {y}, [x = x, y]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    kernels::axpy(T(1), gy.data(), gx.data(), gx.size());
  });
  detail::maybe_check_finite(tape, y, "reshape");
  return y;
}

template <typename T>
Tensor<T> index_map(Tape<T>& tape, const Tensor<T>& x,
                    std::shared_ptr<const std::vector<std::int64_t>> map, Shape out_shape,
                    const char* name) {
  if (static_cast<std::int64_t>(map->size()) != shape_numel(out_shape))
    throw Error(std::string(name) + ": index map size " + std::to_string(map->size()) +
                " does not match output shape " + shape_str(out_shape));
  std::vector<T> out(map->size());
  const auto xv = x.data();
  const auto& m = *map;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[m[i]];
  Tensor<T> y = Tensor<T>::from_data(std::move(out_shape), std::move(out));
  tape.record(name, {x}, {y}, [x = x, y, map]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    const auto& m = *map;
    for (std::size_t i = 0; i < gy.size(); ++i) gx[m[i]] += gy[i];
  });
  detail::maybe_check_finite(tape, y, name);
  return y;
}

template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, std::span<const int> axes) {
  const int r = x.rank();
  if (static_cast<int>(axes.size()) != r) throw Error("permute: axes rank mismatch");
  std::vector<bool> seen(r, false);
  for (int ax : axes) {
    if (ax < 0 || ax >= r || seen[ax]) throw Error("permute: invalid axis permutation");
    seen[ax] = true;
  }
  Shape os(r);
  for (int i = 0; i < r; ++i) os[i] = x.dim(axes[i]);
  std::vector<std::int64_t> istr(r, 1);
  for (int ax = r - 2; ax >= 0; --ax) istr[ax] = istr[ax + 1] * x.dim(ax + 1);

  auto map = std::make_shared<std::vector<std::int64_t>>(shape_numel(os));
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t src = 0;
  // src tracks sum(idx[i] * istr[axes[i]]) through an odometer walk.
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(map->size()); ++i) {
    (*map)[i] = src;
    for (int ax = r - 1; ax >= 0; --ax) {
      ++idx[ax];
      src += istr[axes[ax]];
      if (idx[ax] < os[ax]) break;
      src -= istr[axes[ax]] * os[ax];
      idx[ax] = 0;
    }
  }
  return index_map(tape, x, std::move(map), std::move(os), "permute");
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  Tensor<T> y = Tensor<T>::scalar_value(acc);
  tape.record("sum", {x}, {y}, [x = x, y]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    const T g = y.grad()[0];
    auto gx = x.grad_accum();
    for (auto& v : gx) v += g;
  });
  detail::maybe_check_finite(tape, y, "sum");
  return y;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  if (x.numel() == 0) throw Error("mean: empty tensor");
  T acc = T(0);
  for (T v : x.data()) acc += v;
  const T n = static_cast<T>(x.numel());
  Tensor<T> y = Tensor<T>::scalar_value(acc / n);
  tape.record("mean", {x}, {y}, [x = x, y, n]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    const T g = y.grad()[0] / n;
    auto gx = x.grad_accum();
    for (auto& v : gx) v += g;
  });
  detail::maybe_check_finite(tape, y, "mean");
  return y;
}

template <typename T>
Tensor<T> row_mean(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() != 2) throw Error("row_mean: expected rank 2, got " + shape_str(x.shape()));
  const std::int64_t rows = x.dim(0), cols = x.dim(1);
  if (cols == 0) throw Error("row_mean: empty rows");
  std::vector<T> out(rows);
  const auto xv = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (std::int64_t c = 0; c < cols; ++c) acc += xv[r * cols + c];
    out[r] = acc / static_cast<T>(cols);
  }
  Tensor<T> y = Tensor<T>::from_data({rows}, std::move(out));
  tape.record("row_mean", {x}, {y}, [x = x, y, rows, cols]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T g = gy[r] / static_cast<T>(cols);
      for (std::int64_t c = 0; c < cols; ++c) gx[r * cols + c] += g;
    }
  });
  detail::maybe_check_finite(tape, y, "row_mean");
  return y;
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, int axis) {
  const int r = x.rank();
  if (axis < 0 || axis >= r) throw Error("softmax: axis " + std::to_string(axis) + " out of range");
  const std::int64_t alen = x.dim(axis);
  std::int64_t outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= x.dim(ax);
  for (int ax = axis + 1; ax < r; ++ax) inner *= x.dim(ax);

  Tensor<T> y = Tensor<T>::zeros(x.shape());
  {
    const auto xv = x.data();
    auto yv = y.data();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t in = 0; in < inner; ++in) {
        const std::int64_t base = o * alen * inner + in;
        T mx = xv[base];
        for (std::int64_t a = 1; a < alen; ++a) mx = std::max(mx, xv[base + a * inner]);
        T total = T(0);
        for (std::int64_t a = 0; a < alen; ++a) {
          const T e = std::exp(xv[base + a * inner] - mx);
          yv[base + a * inner] = e;
          total += e;
        }
        for (std::int64_t a = 0; a < alen; ++a) yv[base + a * inner] /= total;
      }
  }
  tape.record("softmax", {x}, {y}, [x = x, y, outer, inner, alen]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    auto yv = y.data();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t in = 0; in < inner; ++in) {
        const std::int64_t base = o * alen * inner + in;
        T dot = T(0);
        for (std::int64_t a = 0; a < alen; ++a)
          dot += gy[base + a * inner] * yv[base + a * inner];
        for (std::int64_t a = 0; a < alen; ++a) {
          const std::int64_t i = base + a * inner;
          gx[i] += yv[i] * (gy[i] - dot);
        }
      }
  });
  detail::maybe_check_finite(tape, y, "softmax");
  return y;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  const int r = x.rank();
  if (r < 1) throw Error("layer_norm: rank 0 input");
  const std::int64_t d = x.dim(r - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != d)
    throw ShapeError("layer_norm", shape_str(x.shape()), shape_str(gamma.shape()));
  if (beta.rank() != 1 || beta.dim(0) != d)
    throw ShapeError("layer_norm", shape_str(x.shape()), shape_str(beta.shape()));
  const std::int64_t rows = x.numel() / d;

  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv = std::make_shared<std::vector<T>>(rows);
  Tensor<T> y = Tensor<T>::zeros(x.shape());
  {
    const auto xv = x.data();
    const auto gv = gamma.data();
    const auto bv = beta.data();
    auto yv = y.data();
    for (std::int64_t row = 0; row < rows; ++row) {
      const std::int64_t base = row * d;
      T mu = T(0);
      for (std::int64_t i = 0; i < d; ++i) mu += xv[base + i];
      mu /= static_cast<T>(d);
      T var = T(0);
      for (std::int64_t i = 0; i < d; ++i) {
        const T c = xv[base + i] - mu;
        var += c * c;
      }
      var /= static_cast<T>(d);
      const T iv = T(1) / std::sqrt(var + eps);
      (*inv)[row] = iv;
      for (std::int64_t i = 0; i < d; ++i) {
        const T xh = (xv[base + i] - mu) * iv;
        (*xhat)[base + i] = xh;
        yv[base + i] = gv[i] * xh + bv[i];
      }
    }
  }
  tape.record("layer_norm", {x, gamma, beta}, {y},
              [x = x, gamma = gamma, beta = beta, y, xhat, inv, rows, d]() mutable {
    if (!y.has_grad()) return;
    auto gy = y.grad();
    const auto gv = gamma.data();
    const bool gx_on = x.requires_grad();
    const bool gg_on = gamma.requires_grad();
    const bool gb_on = beta.requires_grad();
    auto gx = gx_on ? x.grad_accum() : std::span<T>{};
    auto gg = gg_on ? gamma.grad_accum() : std::span<T>{};
    auto gb = gb_on ? beta.grad_accum() : std::span<T>{};
    for (std::int64_t row = 0; row < rows; ++row) {
      const std::int64_t base = row * d;
      if (gx_on) {
        T m1 = T(0), m2 = T(0);
        for (std::int64_t i = 0; i < d; ++i) {
          const T gyg = gy[base + i] * gv[i];
          m1 += gyg;
          m2 += gyg * (*xhat)[base + i];
        }
        m1 /= static_cast<T>(d);
        m2 /= static_cast<T>(d);
        const T iv = (*inv)[row];
        for (std::int64_t i = 0; i < d; ++i) {
          const T gyg = gy[base + i] * gv[i];
          gx[base + i] += iv * (gyg - m1 - (*xhat)[base + i] * m2);
        }
      }
      if (gg_on)
        for (std::int64_t i = 0; i < d; ++i) gg[i] += gy[base + i] * (*xhat)[base + i];
      if (gb_on)
        for (std::int64_t i = 0; i < d; ++i) gb[i] += gy[base + i];
    }
  });
  detail::maybe_check_finite(tape, y, "layer_norm");
  return y;
}

namespace detail {

template <typename T>
Tensor<T> linear_impl(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias) {
  if (x.rank() < 1 || w.rank() != 2) throw ShapeError("linear", shape_str(x.shape()), shape_str(w.shape()));
  const std::int64_t in = x.dim(x.rank() - 1);
  if (w.dim(0) != in) throw ShapeError("linear", shape_str(x.shape()), shape_str(w.shape()));
  const std::int64_t out = w.dim(1);
  if (bias && (bias->rank() != 1 || bias->dim(0) != out))
    throw ShapeError("linear", shape_str(w.shape()), shape_str(bias->shape()));
  const std::int64_t rows = x.numel() / in;

  Shape os(x.shape().begin(), x.shape().end() - 1);
  os.push_back(out);
  Tensor<T> y = Tensor<T>::zeros(os);
  kernels::gemm_nn(rows, out, in, x.data().data(), w.data().data(), y.data().data(), false);
  if (bias) {
    T* yp = y.data().data();
    const T* bp = bias->data().data();
    for (std::int64_t r = 0; r < rows; ++r)
      kernels::add(yp + r * out, bp, yp + r * out, static_cast<std::size_t>(out));
  }
  Tensor<T> b = bias ? *bias : Tensor<T>{};
  tape.record("linear", bias ? std::initializer_list<Tensor<T>>{x, w, b}
                             : std::initializer_list<Tensor<T>>{x, w},
              {y}, [x = x, w = w, b, y, rows, in, out]() mutable {
                if (!y.has_grad()) return;
                auto gy = y.grad();
                if (x.requires_grad()) {
                  auto gx = x.grad_accum();
                  kernels::gemm_nt(rows, in, out, gy.data(), w.data().data(), gx.data(), true);
                }
                if (w.requires_grad()) {
                  auto gw = w.grad_accum();
                  kernels::gemm_tn(in, out, rows, x.data().data(), gy.data(), gw.data(), true);
                }
                if (b.defined() && b.requires_grad()) {
                  auto gb = b.grad_accum();
                  for (std::int64_t r = 0; r < rows; ++r)
                    kernels::add(gb.data(), gy.data() + r * out, gb.data(),
                                 static_cast<std::size_t>(out));
                }
              });
  maybe_check_finite(tape, y, "linear");
  return y;
}

}  // namespace detail

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w) {
  return detail::linear_impl<T>(tape, x, w, nullptr);
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return detail::linear_impl(tape, x, w, &b);
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T m = rng.uniform() >= p ? keep_scale : T(0);
    (*mask)[i] = m;
    out[i] = xv[i] * m;
  }
  Tensor<T> y = Tensor<T>::from_data(x.shape(), std::move(out));
  tape.record("dropout", {x}, {y}, [x = x, y, mask]() mutable {
    if (!y.has_grad() || !x.requires_grad()) return;
    auto gy = y.grad();
    auto gx = x.grad_accum();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (*mask)[i];
  });
  detail::maybe_check_finite(tape, y, "dropout");
  return y;
}

template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table,
                      std::shared_ptr<const std::vector<std::int64_t>> rows) {
  if (table.rank() != 2) throw Error("gather_rows: table must be rank 2, got " + shape_str(table.shape()));
  const std::int64_t cols = table.dim(1);
  const std::int64_t n = static_cast<std::int64_t>(rows->size());
  std::vector<T> out(n * cols);
  const auto tv = table.data();
  for (std::int64_t r = 0; r < n; ++r) {
    const std::int64_t src = (*rows)[r];
    if (src < 0 || src >= table.dim(0))
      throw Error("gather_rows: row index " + std::to_string(src) + " out of range");
    std::memcpy(out.data() + r * cols, tv.data() + src * cols, cols * sizeof(T));
  }
  Tensor<T> y = Tensor<T>::from_data({n, cols}, std::move(out));
  tape.record("gather_rows", {table}, {y}, [table = table, y, rows, cols]() mutable {
    if (!y.has_grad() || !table.requires_grad()) return;
    auto gy = y.grad();
    auto gt = table.grad_accum();
    for (std::size_t r = 0; r < rows->size(); ++r)
      kernels::add(gt.data() + (*rows)[r] * cols, gy.data() + r * cols,
                   gt.data() + (*rows)[r] * cols, static_cast<std::size_t>(cols));
  });
  detail::maybe_check_finite(tape, y, "gather_rows");
  return y;
}

}  // namespace swinlstm

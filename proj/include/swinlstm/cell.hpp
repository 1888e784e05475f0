#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "swinlstm/swin.hpp"

// The recurrent cell: a linear projection over the channel-concatenated
// (input, previous hidden) token grids feeds a block stack whose output A
// drives a single fused gate,
//   F = sigmoid(A),  C_t = F * (tanh(A) + C_{t-1}),  H_t = F * tanh(C_t).
// A is computed once and shared by the sigmoid and tanh paths. |H| < 1
// always (a product of values in (0,1) and (-1,1)); from zero states, |C_t|
// grows by less than 1 per step.

namespace swinlstm {

template <typename T>
struct CellState {
  Tensor<T> h, c;  // same shape (batch, rows, cols, dim)
};

// The fused gate update given the pre-activation grid A.
template <typename T>
CellState<T> gate_update(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& c_prev) {
  Tensor<T> f = sigmoid(tape, a);
  Tensor<T> c = mul(tape, f, add(tape, tanh(tape, a), c_prev));
  Tensor<T> h = mul(tape, f, tanh(tape, c));
  return {h, c};
}

template <typename T>
struct SwinLSTMCell {
  std::int64_t dim = 0, grid_h = 0, grid_w = 0;
  LinearLayer<T> lp;     // 2*dim -> dim over (input ; hidden) channels
  SwinBlockStack<T> stb;

  static SwinLSTMCell make(int depth, int dim, int heads, int window, std::int64_t grid_h,
                           std::int64_t grid_w, bool rel_bias, Rng* rng) {
    SwinLSTMCell c;
    c.dim = dim;
    c.grid_h = grid_h;
    c.grid_w = grid_w;
    c.lp = LinearLayer<T>::make(2 * std::int64_t(dim), dim, rng, true);
    c.stb = SwinBlockStack<T>::make(depth, dim, heads, window, grid_h, grid_w, rel_bias, rng);
    return c;
  }
  static SwinLSTMCell init(int depth, int dim, int heads, int window, std::int64_t grid_h,
                           std::int64_t grid_w, bool rel_bias, Rng& rng) {
    return make(depth, dim, heads, window, grid_h, grid_w, rel_bias, &rng);
  }
  static SwinLSTMCell zeros(int depth, int dim, int heads, int window, std::int64_t grid_h,
                            std::int64_t grid_w, bool rel_bias) {
    return make(depth, dim, heads, window, grid_h, grid_w, rel_bias, nullptr);
  }

  CellState<T> zero_state(std::int64_t batch) const {
    return {Tensor<T>::zeros({batch, grid_h, grid_w, dim}),
            Tensor<T>::zeros({batch, grid_h, grid_w, dim})};
  }

  // One recurrence step. prev == nullptr starts from zero states. Returns
  // the new hidden grid and the full state carrying it. A non-null stb_out
  // receives the block-stack output A (the gate pre-activation grid).
  std::pair<Tensor<T>, CellState<T>> step(Tape<T>& tape, const Tensor<T>& x,
                                          const CellState<T>* prev, double drop_p = 0.0,
                                          Rng* drop_rng = nullptr,
                                          Tensor<T>* stb_out = nullptr) const {
    if (x.rank() != 4 || x.dim(1) != grid_h || x.dim(2) != grid_w || x.dim(3) != dim)
      throw Error("cell_step: expected input (batch, " + std::to_string(grid_h) + ", " +
                  std::to_string(grid_w) + ", " + std::to_string(dim) + "), got " +
                  shape_str(x.shape()));
    CellState<T> start;
    if (prev == nullptr) {
      start = zero_state(x.dim(0));
    } else {
      if (prev->h.shape() != x.shape() || prev->c.shape() != x.shape())
        throw Error("cell_step: state " + shape_str(prev->h.shape()) +
                    " does not match input " + shape_str(x.shape()));
      start = *prev;
    }
    std::array<Tensor<T>, 2> joint{x, start.h};
    Tensor<T> a = stb.forward(tape, lp(tape, concat<T>(tape, joint, 3)), drop_p, drop_rng);
    if (stb_out != nullptr) *stb_out = a;
    CellState<T> next = gate_update(tape, a, start.c);
    return {next.h, next};
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    lp.collect(prefix + ".lp", out);
    stb.collect(prefix + ".stb", out);
  }
};

// Test utility: with the projection and block stack replaced by identity-on-
// sum (A = x + h_prev), the fused gate must agree with the classic
// three-gate update whose input, forget, and output gates all collapse to
// sigmoid(x + h_prev):
//   i = f = o = sigmoid(x+h),  c' = f*c_prev + i*tanh(x+h),  h' = o*tanh(c').
// Compares the tensor-op pipeline against an independent scalar evaluation.
template <typename T>
bool degenerate_gate_check(const Tensor<T>& x, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                           double tol = 1e-12) {
  if (x.shape() != h_prev.shape() || x.shape() != c_prev.shape())
    throw Error("degenerate_gate_check: mismatched shapes " + shape_str(x.shape()) + ", " +
                shape_str(h_prev.shape()) + ", " + shape_str(c_prev.shape()));
  Tape<T> tape(false);
  Tensor<T> a = add(tape, x, h_prev);
  Tensor<T> f_impl = sigmoid(tape, a);
  CellState<T> got = gate_update(tape, a, c_prev);

  const auto xv = x.data(), hv = h_prev.data(), cv = c_prev.data();
  const auto fv = f_impl.data(), gc = got.c.data(), gh = got.h.data();
  for (std::int64_t k = 0; k < x.numel(); ++k) {
    const double av = double(xv[k]) + double(hv[k]);
    const double i = 1.0 / (1.0 + std::exp(-av));
    const double f = 1.0 / (1.0 + std::exp(-av));
    const double o = 1.0 / (1.0 + std::exp(-av));
    const double c = f * double(cv[k]) + i * std::tanh(av);
    const double h = o * std::tanh(c);
    if (std::abs(double(fv[k]) - i) > tol || std::abs(double(fv[k]) - f) > tol ||
        std::abs(double(fv[k]) - o) > tol)
      return false;
    if (std::abs(double(gc[k]) - c) > tol || std::abs(double(gh[k]) - h) > tol) return false;
  }
  return true;
}

}  // namespace swinlstm

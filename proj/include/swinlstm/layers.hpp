#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swinlstm/tensor.hpp"

// Parameter-owning wrappers around the affine tensor ops. Layers are plain
// structs of Tensor handles, so copying a layer aliases its parameters; the
// collect() methods enumerate (name, tensor) pairs for optimizers and
// checkpoints. Every factory comes in two flavors: init(...) draws weights
// from the given Rng (truncated normal, std 0.02, clipped to [-2, 2]) and
// zeros(...) builds an all-zero layer for analytic tests.

namespace swinlstm {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
inline void fill_trunc_normal(Tensor<T>& t, Rng& rng) {
  for (T& v : t.data()) v = static_cast<T>(rng.trunc_normal(0.02, -2.0, 2.0));
}

// y = x @ w [+ b] over the trailing axis; w is (in, out), b is (out,).
template <typename T>
struct LinearLayer {
  Tensor<T> w;
  Tensor<T> b;  // undefined when the layer is bias-free

  static LinearLayer make(std::int64_t in, std::int64_t out, Rng* rng, bool bias) {
    LinearLayer l;
    l.w = Tensor<T>::zeros({in, out});
    l.w.set_requires_grad();
    if (rng != nullptr) fill_trunc_normal(l.w, *rng);
    if (bias) {
      l.b = Tensor<T>::zeros({out});
      l.b.set_requires_grad();
    }
    return l;
  }
  static LinearLayer init(std::int64_t in, std::int64_t out, Rng& rng, bool bias = true) {
    return make(in, out, &rng, bias);
  }
  static LinearLayer zeros(std::int64_t in, std::int64_t out, bool bias = true) {
    return make(in, out, nullptr, bias);
  }

  std::int64_t in_dim() const { return w.dim(0); }
  std::int64_t out_dim() const { return w.dim(1); }

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x) const {
    return b.defined() ? linear(tape, x, w, b) : linear(tape, x, w);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".w", w);
    if (b.defined()) out.emplace_back(prefix + ".b", b);
  }
};

// Normalizes the trailing axis; gamma starts at one, beta at zero.
template <typename T>
struct LayerNormLayer {
  Tensor<T> gamma, beta;

  static LayerNormLayer init(std::int64_t d) {
    LayerNormLayer l;
    l.gamma = Tensor<T>::full({d}, T(1));
    l.gamma.set_requires_grad();
    l.beta = Tensor<T>::zeros({d});
    l.beta.set_requires_grad();
    return l;
  }

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x) const {
    return layer_norm(tape, x, gamma, beta);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

}  // namespace swinlstm

#include <algorithm>
#include <cstddef>
#include <cstdint>

#include "swinlstm/kernels.hpp"

// Scalar reference kernels. These define the numeric semantics every other
// variant must reproduce bit-for-bit: elementwise ops apply per element, and
// GEMM accumulates each output element in ascending-k order.

namespace swinlstm::kernels::scalar {

namespace {

template <typename T>
void add_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale_impl(const T* a, T s, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void gemm_nn_impl(std::int64_t m, std::int64_t n, std::int64_t k,
                  const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + std::size_t(m) * std::size_t(n), T(0));
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt_impl(std::int64_t m, std::int64_t n, std::int64_t k,
                  const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + std::size_t(m) * std::size_t(n), T(0));
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = crow[j];
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

template <typename T>
void gemm_tn_impl(std::int64_t m, std::int64_t n, std::int64_t k,
                  const T* a, const T* b, T* c, bool accumulate) {
  // a is (k, m); contribution order per element is still ascending p.
  if (!accumulate) std::fill(c, c + std::size_t(m) * std::size_t(n), T(0));
  for (std::int64_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

void add(const float* a, const float* b, float* out, std::size_t n) { add_impl(a, b, out, n); }
void add(const double* a, const double* b, double* out, std::size_t n) { add_impl(a, b, out, n); }
void sub(const float* a, const float* b, float* out, std::size_t n) { sub_impl(a, b, out, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { sub_impl(a, b, out, n); }
void mul(const float* a, const float* b, float* out, std::size_t n) { mul_impl(a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { mul_impl(a, b, out, n); }
void scale(const float* a, float s, float* out, std::size_t n) { scale_impl(a, s, out, n); }
void scale(const double* a, double s, double* out, std::size_t n) { scale_impl(a, s, out, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { axpy_impl(alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { axpy_impl(alpha, x, y, n); }

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  gemm_nn_impl(m, n, k, a, b, c, accumulate);
}
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  gemm_nn_impl(m, n, k, a, b, c, accumulate);
}
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  gemm_nt_impl(m, n, k, a, b, c, accumulate);
}
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  gemm_nt_impl(m, n, k, a, b, c, accumulate);
}
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  gemm_tn_impl(m, n, k, a, b, c, accumulate);
}
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  gemm_tn_impl(m, n, k, a, b, c, accumulate);
}

}  // namespace swinlstm::kernels::scalar

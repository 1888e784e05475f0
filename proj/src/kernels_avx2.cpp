#include <cstddef>
#include <cstdint>

#include "swinlstm/errors.hpp"
#include "swinlstm/kernels.hpp"

// AVX2 kernel variant. Elementwise ops are lane-parallel copies of the scalar
// reference; GEMM vectorizes across output columns while keeping the
// ascending-k accumulation per element, with no FMA, so every result is
// bit-identical to the scalar variant. The transposed forms reuse the NN core
// through an explicit scratch transpose (pure data movement, no rounding).

#if defined(SWINLSTM_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <vector>

namespace swinlstm::kernels::avx2 {

bool compiled() { return true; }

namespace {

template <typename T>
std::vector<T>& scratch() {
  thread_local std::vector<T> buf;
  return buf;
}

void add_f32(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void add_f64(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_f32(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void sub_f64(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_f32(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_f64(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_f32(const float* a, float s, float* out, std::size_t n) {
  const __m256 sv = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] * s;
}

void scale_f64(const double* a, double s, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] * s;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 acc = _mm256_loadu_ps(y + i);
    acc = _mm256_add_ps(acc, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, acc);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// C[m,n] += A[m,k] * B[k,n], accumulators kept in registers across k.
void gemm_core_f32(std::int64_t m, std::int64_t n, std::int64_t k,
                   const float* a, const float* b, float* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    std::int64_t j = 0;
    for (; j + 32 <= n; j += 32) {
      __m256 c0 = _mm256_loadu_ps(crow + j);
      __m256 c1 = _mm256_loadu_ps(crow + j + 8);
      __m256 c2 = _mm256_loadu_ps(crow + j + 16);
      __m256 c3 = _mm256_loadu_ps(crow + j + 24);
      for (std::int64_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(arow[p]);
        const float* brow = b + p * n + j;
        c0 = _mm256_add_ps(c0, _mm256_mul_ps(av, _mm256_loadu_ps(brow)));
        c1 = _mm256_add_ps(c1, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 8)));
        c2 = _mm256_add_ps(c2, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 16)));
        c3 = _mm256_add_ps(c3, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 24)));
      }
      _mm256_storeu_ps(crow + j, c0);
      _mm256_storeu_ps(crow + j + 8, c1);
      _mm256_storeu_ps(crow + j + 16, c2);
      _mm256_storeu_ps(crow + j + 24, c3);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 c0 = _mm256_loadu_ps(crow + j);
      for (std::int64_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(arow[p]);
        c0 = _mm256_add_ps(c0, _mm256_mul_ps(av, _mm256_loadu_ps(b + p * n + j)));
      }
      _mm256_storeu_ps(crow + j, c0);
    }
    for (; j < n; ++j) {
      float acc = crow[j];
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

void gemm_core_f64(std::int64_t m, std::int64_t n, std::int64_t k,
                   const double* a, const double* b, double* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::int64_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::int64_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(arow[p]);
        const double* brow = b + p * n + j;
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(av, _mm256_loadu_pd(brow)));
        c1 = _mm256_add_pd(c1, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 4)));
        c2 = _mm256_add_pd(c2, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 8)));
        c3 = _mm256_add_pd(c3, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 12)));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::int64_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(arow[p]);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(av, _mm256_loadu_pd(b + p * n + j)));
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double acc = crow[j];
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

template <typename T>
void transpose(std::int64_t rows, std::int64_t cols, const T* src, T* dst) {
  // src is (rows, cols); dst becomes (cols, rows).
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

template <typename T>
void zero_unless(bool accumulate, T* c, std::int64_t m, std::int64_t n) {
  if (!accumulate) std::fill(c, c + std::size_t(m) * std::size_t(n), T(0));
}

}  // namespace

void add(const float* a, const float* b, float* out, std::size_t n) { add_f32(a, b, out, n); }
void add(const double* a, const double* b, double* out, std::size_t n) { add_f64(a, b, out, n); }
void sub(const float* a, const float* b, float* out, std::size_t n) { sub_f32(a, b, out, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { sub_f64(a, b, out, n); }
void mul(const float* a, const float* b, float* out, std::size_t n) { mul_f32(a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { mul_f64(a, b, out, n); }
void scale(const float* a, float s, float* out, std::size_t n) { scale_f32(a, s, out, n); }
void scale(const double* a, double s, double* out, std::size_t n) { scale_f64(a, s, out, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { axpy_f32(alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { axpy_f64(alpha, x, y, n); }

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  zero_unless(accumulate, c, m, n);
  gemm_core_f32(m, n, k, a, b, c);
}
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  zero_unless(accumulate, c, m, n);
  gemm_core_f64(m, n, k, a, b, c);
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  zero_unless(accumulate, c, m, n);
  auto& buf = scratch<float>();
  buf.resize(std::size_t(k) * std::size_t(n));
  transpose(n, k, b, buf.data());  // (n,k) -> (k,n)
  gemm_core_f32(m, n, k, a, buf.data(), c);
}
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  zero_unless(accumulate, c, m, n);
  auto& buf = scratch<double>();
  buf.resize(std::size_t(k) * std::size_t(n));
  transpose(n, k, b, buf.data());
  gemm_core_f64(m, n, k, a, buf.data(), c);
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  zero_unless(accumulate, c, m, n);
  auto& buf = scratch<float>();
  buf.resize(std::size_t(m) * std::size_t(k));
  transpose(k, m, a, buf.data());  // (k,m) -> (m,k)
  gemm_core_f32(m, n, k, buf.data(), b, c);
}
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  zero_unless(accumulate, c, m, n);
  auto& buf = scratch<double>();
  buf.resize(std::size_t(m) * std::size_t(k));
  transpose(k, m, a, buf.data());
  gemm_core_f64(m, n, k, buf.data(), b, c);
}

}  // namespace swinlstm::kernels::avx2

#else  // !SWINLSTM_HAVE_AVX2

namespace swinlstm::kernels::avx2 {

bool compiled() { return false; }

namespace {
[[noreturn]] void unavailable() { throw Error("AVX2 kernels were not built on this platform"); }
}  // namespace

void add(const float*, const float*, float*, std::size_t) { unavailable(); }
void add(const double*, const double*, double*, std::size_t) { unavailable(); }
void sub(const float*, const float*, float*, std::size_t) { unavailable(); }
void sub(const double*, const double*, double*, std::size_t) { unavailable(); }
void mul(const float*, const float*, float*, std::size_t) { unavailable(); }
void mul(const double*, const double*, double*, std::size_t) { unavailable(); }
void scale(const float*, float, float*, std::size_t) { unavailable(); }
void scale(const double*, double, double*, std::size_t) { unavailable(); }
void axpy(float, const float*, float*, std::size_t) { unavailable(); }
void axpy(double, const double*, double*, std::size_t) { unavailable(); }
void gemm_nn(std::int64_t, std::int64_t, std::int64_t, const float*, const float*, float*, bool) { unavailable(); }
void gemm_nn(std::int64_t, std::int64_t, std::int64_t, const double*, const double*, double*, bool) { unavailable(); }
void gemm_nt(std::int64_t, std::int64_t, std::int64_t, const float*, const float*, float*, bool) { unavailable(); }
void gemm_nt(std::int64_t, std::int64_t, std::int64_t, const double*, const double*, double*, bool) { unavailable(); }
void gemm_tn(std::int64_t, std::int64_t, std::int64_t, const float*, const float*, float*, bool) { unavailable(); }
void gemm_tn(std::int64_t, std::int64_t, std::int64_t, const double*, const double*, double*, bool) { unavailable(); }

}  // namespace swinlstm::kernels::avx2

#endif

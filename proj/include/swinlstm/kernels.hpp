#pragma once

#include <cstddef>
#include <cstdint>

// Numeric inner loops behind the tensor ops. Two variants exist: a scalar
// reference and an AVX2 one, selected once at runtime from CPU features (or
// the SWINLSTM_KERNELS env var / force_level). Both variants accumulate the
// contributions to any given output element in the same order, so they are
// bit-identical; picking a level never changes results.

namespace swinlstm::kernels {

enum class Level { scalar = 0, avx2 = 1 };

const char* level_name(Level level);
bool level_available(Level level);
Level active_level();
// Pins the dispatch level for the whole process; throws if unavailable.
void force_level(Level level);
// Re-detects from hardware and the SWINLSTM_KERNELS env var.
void reset_level();

// Elementwise kernels over contiguous buffers; out may alias an input.
void add(const float* a, const float* b, float* out, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const float* a, const float* b, float* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const float* a, float s, float* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

// Row-major GEMM family. Contributions to each output element are summed in
// ascending-k order with no fused multiply-add, in every variant.
//   gemm_nn: C[m,n] (+)= A[m,k] * B[k,n]
//   gemm_nt: C[m,n] (+)= A[m,k] * B[n,k]^T
//   gemm_tn: C[m,n] (+)= A[k,m]^T * B[k,n]
// With accumulate=false, C is zeroed first.
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);

// Both variants exposed directly so equivalence tests can compare them
// without touching the dispatcher.
namespace scalar {
void add(const float* a, const float* b, float* out, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const float* a, const float* b, float* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const float* a, float s, float* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
}  // namespace scalar

namespace avx2 {
// True when the AVX2 translation unit was built with AVX2 enabled.
bool compiled();
void add(const float* a, const float* b, float* out, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const float* a, const float* b, float* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const float* a, float s, float* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate);
}  // namespace avx2

}  // namespace swinlstm::kernels

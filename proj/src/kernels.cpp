#include <atomic>
#include <cstdlib>
#include <string>

#include "swinlstm/errors.hpp"
#include "swinlstm/kernels.hpp"

namespace swinlstm::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Level detect() {
  Level level = (avx2::compiled() && cpu_has_avx2()) ? Level::avx2 : Level::scalar;
  if (const char* env = std::getenv("SWINLSTM_KERNELS")) {
    std::string v(env);
    if (v == "scalar") {
      level = Level::scalar;
    } else if (v == "avx2") {
      if (!level_available(Level::avx2))
        throw Error("SWINLSTM_KERNELS=avx2 but AVX2 is unavailable on this machine");
      level = Level::avx2;
    } else if (!v.empty() && v != "auto") {
      throw Error("SWINLSTM_KERNELS: unknown value '" + v + "' (use auto, scalar, or avx2)");
    }
  }
  return level;
}

std::atomic<int> g_level{-1};

Level current() {
  int lv = g_level.load(std::memory_order_relaxed);
  if (lv < 0) {
    Level detected = detect();
    g_level.store(static_cast<int>(detected), std::memory_order_relaxed);
    return detected;
  }
  return static_cast<Level>(lv);
}

}  // namespace

const char* level_name(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
  }
  return "?";
}

bool level_available(Level level) {
  switch (level) {
    case Level::scalar: return true;
    case Level::avx2: return avx2::compiled() && cpu_has_avx2();
  }
  return false;
}

Level active_level() { return current(); }

void force_level(Level level) {
  if (!level_available(level))
    throw Error(std::string("kernel level '") + level_name(level) + "' is unavailable on this machine");
  g_level.store(static_cast<int>(level), std::memory_order_relaxed);
}

void reset_level() { g_level.store(-1, std::memory_order_relaxed); }

#define SWINLSTM_DISPATCH(call)              \
  do {                                       \
    if (current() == Level::avx2) {          \
      avx2::call;                            \
    } else {                                 \
      scalar::call;                          \
    }                                        \
  } while (0)

void add(const float* a, const float* b, float* out, std::size_t n) { SWINLSTM_DISPATCH(add(a, b, out, n)); }
void add(const double* a, const double* b, double* out, std::size_t n) { SWINLSTM_DISPATCH(add(a, b, out, n)); }
void sub(const float* a, const float* b, float* out, std::size_t n) { SWINLSTM_DISPATCH(sub(a, b, out, n)); }
void sub(const double* a, const double* b, double* out, std::size_t n) { SWINLSTM_DISPATCH(sub(a, b, out, n)); }
void mul(const float* a, const float* b, float* out, std::size_t n) { SWINLSTM_DISPATCH(mul(a, b, out, n)); }
void mul(const double* a, const double* b, double* out, std::size_t n) { SWINLSTM_DISPATCH(mul(a, b, out, n)); }
void scale(const float* a, float s, float* out, std::size_t n) { SWINLSTM_DISPATCH(scale(a, s, out, n)); }
void scale(const double* a, double s, double* out, std::size_t n) { SWINLSTM_DISPATCH(scale(a, s, out, n)); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { SWINLSTM_DISPATCH(axpy(alpha, x, y, n)); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { SWINLSTM_DISPATCH(axpy(alpha, x, y, n)); }

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  SWINLSTM_DISPATCH(gemm_nn(m, n, k, a, b, c, accumulate));
}
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  SWINLSTM_DISPATCH(gemm_nn(m, n, k, a, b, c, accumulate));
}
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  SWINLSTM_DISPATCH(gemm_nt(m, n, k, a, b, c, accumulate));
}
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  SWINLSTM_DISPATCH(gemm_nt(m, n, k, a, b, c, accumulate));
}
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const float* a, const float* b, float* c, bool accumulate) {
  SWINLSTM_DISPATCH(gemm_tn(m, n, k, a, b, c, accumulate));
}
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  SWINLSTM_DISPATCH(gemm_tn(m, n, k, a, b, c, accumulate));
}

#undef SWINLSTM_DISPATCH

}  // namespace swinlstm::kernels

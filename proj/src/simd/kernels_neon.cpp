#include <arm_neon.h>

#include "dalc/simd/kernels.hpp"

namespace dalc::simd::detail {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void min_max_neon(const float* row, float* mins, float* maxs, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(row + i);
    vst1q_f32(mins + i, vminq_f32(v, vld1q_f32(mins + i)));
    vst1q_f32(maxs + i, vmaxq_f32(v, vld1q_f32(maxs + i)));
  }
  for (; i < n; ++i) {
    if (row[i] < mins[i]) mins[i] = row[i];
    if (row[i] > maxs[i]) maxs[i] = row[i];
  }
}

}  // namespace

const KernelTable kNeonTable{Isa::kNeon, dot_neon, axpy_neon, min_max_neon};

}  // namespace dalc::simd::detail

#include "dalc/simd/kernels.hpp"

namespace dalc::simd::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void min_max_scalar(const float* row, float* mins, float* maxs, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (row[i] < mins[i]) mins[i] = row[i];
    if (row[i] > maxs[i]) maxs[i] = row[i];
  }
}

}  // namespace

const KernelTable kScalarTable{Isa::kScalar, dot_scalar, axpy_scalar, min_max_scalar};

}  // namespace dalc::simd::detail

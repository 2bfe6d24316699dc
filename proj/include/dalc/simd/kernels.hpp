#pragma once

// Data-parallel inner loops used by the predictor network and by pooling.
//
// Each kernel has a scalar reference implementation plus vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64). The variant is picked once at first
// use from the running CPU; DALC_SIMD=scalar forces the reference path.
// Vector variants reorder floating-point sums, so they agree with the scalar
// path to rounding, not bit-for-bit. Within one process the choice is fixed,
// which keeps every seeded run deterministic.

#include <cstddef>
#include <span>
#include <string_view>

namespace dalc::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // mins[i] = min(mins[i], row[i]); maxs[i] = max(maxs[i], row[i])
  void (*min_max_accumulate)(const float* row, float* mins, float* maxs, std::size_t n);
};

bool isa_supported(Isa isa);
const KernelTable& kernels_for(Isa isa);  // throws dalc::Error if unsupported
const KernelTable& active_kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(DALC_HAVE_AVX2_KERNELS)
extern const KernelTable kAvx2Table;
#endif
#if defined(DALC_HAVE_NEON_KERNELS)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace dalc::simd

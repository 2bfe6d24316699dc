#include <cstdlib>
#include <string>

#include "dalc/error.hpp"
#include "dalc/simd/kernels.hpp"

namespace dalc::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(DALC_HAVE_AVX2_KERNELS)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(DALC_HAVE_NEON_KERNELS)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error(ErrorCode::kInvalidArgument,
                "SIMD variant '" + std::string(isa_name(isa)) + "' not available on this CPU");
  }
  switch (isa) {
#if defined(DALC_HAVE_AVX2_KERNELS)
    case Isa::kAvx2: return detail::kAvx2Table;
#endif
#if defined(DALC_HAVE_NEON_KERNELS)
    case Isa::kNeon: return detail::kNeonTable;
#endif
    default: return detail::kScalarTable;
  }
}

namespace {

const KernelTable& select_kernels() {
  if (const char* forced = std::getenv("DALC_SIMD")) {
    if (std::string_view(forced) == "scalar") return detail::kScalarTable;
  }
  if (isa_supported(Isa::kAvx2)) return kernels_for(Isa::kAvx2);
  if (isa_supported(Isa::kNeon)) return kernels_for(Isa::kNeon);
  return detail::kScalarTable;
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace dalc::simd

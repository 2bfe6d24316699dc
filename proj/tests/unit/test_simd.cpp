#include <cmath>
#include <random>

#include "dalc/simd/kernels.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dalc;
using namespace dalc::simd;

namespace {

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon})
    if (isa_supported(isa)) out.push_back(&kernels_for(isa));
  return out;
}

}  // namespace

TEST_CASE("the scalar table is always available") {
  CHECK(isa_supported(Isa::kScalar));
  CHECK(kernels_for(Isa::kScalar).isa == Isa::kScalar);
  CHECK(isa_name(Isa::kAvx2) == "avx2");
  CHECK(isa_supported(active_kernels().isa));
  MESSAGE("active kernels: " << isa_name(active_kernels().isa));
}

TEST_CASE("scalar reference kernels") {
  const auto& k = kernels_for(Isa::kScalar);
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(k.dot(a, b, 3) == 12.0);
  CHECK(k.dot(a, b, 0) == 0.0);
  double y[] = {1, 1, 1};
  k.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  const float row[] = {1.0f, -2.0f};
  float mins[] = {0.0f, 0.0f}, maxs[] = {0.5f, 0.5f};
  k.min_max_accumulate(row, mins, maxs, 2);
  CHECK(mins[1] == -2.0f);
  CHECK(maxs[0] == 1.0f);
  CHECK(maxs[1] == 0.5f);
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const auto& ref = kernels_for(Isa::kScalar);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (const auto* k : vector_tables()) {
    CAPTURE(isa_name(k->isa));
    for (std::size_t n = 0; n < 70; ++n) {
      std::vector<double> a(n), b(n), y1(n), y2(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = nd(rng);
        b[i] = nd(rng);
        y1[i] = y2[i] = nd(rng);
      }
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * (mag + 1.0));

      ref.axpy(0.37, a.data(), y1.data(), n);
      k->axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

      std::vector<float> row(n), mn1(n), mx1(n), mn2, mx2;
      for (std::size_t i = 0; i < n; ++i) {
        row[i] = static_cast<float>(nd(rng));
        mn1[i] = static_cast<float>(nd(rng));
        mx1[i] = mn1[i] + 0.5f;
      }
      mn2 = mn1;
      mx2 = mx1;
      ref.min_max_accumulate(row.data(), mn1.data(), mx1.data(), n);
      k->min_max_accumulate(row.data(), mn2.data(), mx2.data(), n);
      CHECK(mn1 == mn2);
      CHECK(mx1 == mx2);
    }
  }
}

TEST_CASE("unsupported instruction sets are refused") {
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (!isa_supported(isa)) CHECK(support::error_of([&] { kernels_for(isa); }) == ErrorCode::kInvalidArgument);
  }
}

#include "petsa/kernels.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "petsa/rng.hpp"

using petsa::Rng;
namespace kernels = petsa::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

void naive_gemm_nn(const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

}  // namespace

TEST_CASE("scalar elementwise kernels") {
  const auto& k = kernels::scalar();
  std::vector<double> x = {1.0, -2.0, 3.5, 0.0};
  std::vector<double> y = {0.5, 4.0, -1.0, 2.0};
  std::vector<double> r(4);

  k.add(x.data(), y.data(), r.data(), 4);
  CHECK(r == std::vector<double>{1.5, 2.0, 2.5, 2.0});
  k.sub(x.data(), y.data(), r.data(), 4);
  CHECK(r == std::vector<double>{0.5, -6.0, 4.5, -2.0});
  k.mul(x.data(), y.data(), r.data(), 4);
  CHECK(r == std::vector<double>{0.5, -8.0, -3.5, 0.0});
  k.scale(x.data(), -2.0, r.data(), 4);
  CHECK(r == std::vector<double>{-2.0, 4.0, -7.0, 0.0});
  k.abs(x.data(), r.data(), 4);
  CHECK(r == std::vector<double>{1.0, 2.0, 3.5, 0.0});

  r = y;
  k.axpy(2.0, x.data(), r.data(), 4);
  CHECK(r == std::vector<double>{2.5, 0.0, 6.0, 2.0});

  CHECK(k.dot(x.data(), y.data(), 4) == doctest::Approx(-11.0));
  CHECK(k.sum(x.data(), 4) == doctest::Approx(2.5));
}

TEST_CASE("elementwise kernels allow aliased output") {
  const auto& k = kernels::scalar();
  std::vector<double> x = {1.0, -2.0, 3.0};
  k.add(x.data(), x.data(), x.data(), 3);
  CHECK(x == std::vector<double>{2.0, -4.0, 6.0});
  k.abs(x.data(), x.data(), 3);
  CHECK(x == std::vector<double>{2.0, 4.0, 6.0});
}

TEST_CASE("gemm variants match a naive triple loop") {
  Rng rng(7);
  const std::size_t m = 5, kk = 7, n = 3;
  auto a = random_vec(rng, m * kk);
  auto b = random_vec(rng, kk * n);
  std::vector<double> want(m * n, 0.0);
  naive_gemm_nn(a, b, want, m, kk, n);

  const auto& k = kernels::scalar();

  std::vector<double> c(m * n, 0.0);
  k.gemm_nn(a.data(), b.data(), c.data(), m, kk, n);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));

  // nt: feed b transposed, expect the same product
  std::vector<double> bt(n * kk);
  for (std::size_t p = 0; p < kk; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * kk + p] = b[p * n + j];
  }
  std::fill(c.begin(), c.end(), 0.0);
  k.gemm_nt(a.data(), bt.data(), c.data(), m, kk, n);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));

  // tn: feed a transposed
  std::vector<double> at(kk * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < kk; ++p) at[p * m + i] = a[i * kk + p];
  }
  std::fill(c.begin(), c.end(), 0.0);
  k.gemm_tn(at.data(), b.data(), c.data(), m, kk, n);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("gemm accumulates into c") {
  const auto& k = kernels::scalar();
  std::vector<double> a = {1.0, 0.0, 0.0, 1.0};
  std::vector<double> b = {2.0, 3.0, 4.0, 5.0};
  std::vector<double> c = {10.0, 10.0, 10.0, 10.0};
  k.gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<double>{12.0, 13.0, 14.0, 15.0});
}

TEST_CASE("gemm propagates NaN rows") {
  const auto& k = kernels::scalar();
  std::vector<double> a = {std::nan(""), 1.0, 2.0, 3.0};
  std::vector<double> b = {1.0, 0.0, 0.0, 1.0};
  std::vector<double> c(4, 0.0);
  k.gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(std::isnan(c[0]));
  CHECK(std::isnan(c[1]));
  CHECK(c[2] == 2.0);
  CHECK(c[3] == 3.0);
}

TEST_CASE("variant selection") {
  auto names = kernels::available();
  REQUIRE(!names.empty());
  CHECK(names[0] == "scalar");
  CHECK(!kernels::select("no-such-variant"));
  for (const auto& name : names) {
    CHECK(kernels::select(name));
    CHECK(kernels::active().name == name);
  }
  REQUIRE(kernels::select("scalar"));
}

TEST_CASE("all available variants agree with the reference") {
  Rng rng(123);
  const std::size_t n = 257;  // odd length exercises SIMD tails
  auto x = random_vec(rng, n);
  auto y = random_vec(rng, n);

  std::vector<double> want(n), got(n);
  const auto& ref = kernels::scalar();

  for (const auto& name : kernels::available()) {
    REQUIRE(kernels::select(name));
    const auto& k = kernels::active();
    CAPTURE(name);

    // same-op-per-element kernels: bitwise
    ref.add(x.data(), y.data(), want.data(), n);
    k.add(x.data(), y.data(), got.data(), n);
    CHECK(want == got);
    ref.sub(x.data(), y.data(), want.data(), n);
    k.sub(x.data(), y.data(), got.data(), n);
    CHECK(want == got);
    ref.mul(x.data(), y.data(), want.data(), n);
    k.mul(x.data(), y.data(), got.data(), n);
    CHECK(want == got);
    ref.scale(x.data(), 1.7, want.data(), n);
    k.scale(x.data(), 1.7, got.data(), n);
    CHECK(want == got);
    ref.abs(x.data(), want.data(), n);
    k.abs(x.data(), got.data(), n);
    CHECK(want == got);

    // reassociated/fused kernels: to rounding
    want = y;
    got = y;
    ref.axpy(0.3, x.data(), want.data(), n);
    k.axpy(0.3, x.data(), got.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    CHECK(k.dot(x.data(), y.data(), n) ==
          doctest::Approx(ref.dot(x.data(), y.data(), n)).epsilon(1e-12));
    CHECK(k.sum(x.data(), n) == doctest::Approx(ref.sum(x.data(), n)).epsilon(1e-12));

    const std::size_t m = 9, kd = 33, nd = 11;
    auto a = random_vec(rng, m * kd);
    auto b = random_vec(rng, kd * nd);
    std::vector<double> cw(m * nd, 0.0), cg(m * nd, 0.0);
    ref.gemm_nn(a.data(), b.data(), cw.data(), m, kd, nd);
    k.gemm_nn(a.data(), b.data(), cg.data(), m, kd, nd);
    for (std::size_t i = 0; i < cw.size(); ++i)
      CHECK(cg[i] == doctest::Approx(cw[i]).epsilon(1e-12));

    auto bt = random_vec(rng, nd * kd);
    std::fill(cw.begin(), cw.end(), 0.0);
    std::fill(cg.begin(), cg.end(), 0.0);
    ref.gemm_nt(a.data(), bt.data(), cw.data(), m, kd, nd);
    k.gemm_nt(a.data(), bt.data(), cg.data(), m, kd, nd);
    for (std::size_t i = 0; i < cw.size(); ++i)
      CHECK(cg[i] == doctest::Approx(cw[i]).epsilon(1e-12));

    auto at = random_vec(rng, kd * m);
    std::fill(cw.begin(), cw.end(), 0.0);
    std::fill(cg.begin(), cg.end(), 0.0);
    ref.gemm_tn(at.data(), b.data(), cw.data(), m, kd, nd);
    k.gemm_tn(at.data(), b.data(), cg.data(), m, kd, nd);
    for (std::size_t i = 0; i < cw.size(); ++i)
      CHECK(cg[i] == doctest::Approx(cw[i]).epsilon(1e-12));
  }
  REQUIRE(kernels::select("scalar"));
}

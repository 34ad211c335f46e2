#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "psv/kernels/kernels.hpp"

using namespace psv;
namespace k = psv::kernels;

namespace {

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

struct Dims {
  std::size_t m, k, n;
};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("gemm variants agree with the serial reference") {
    // Sizes straddle the register tile (4x16) and the depth block (256).
    const Dims cases[] = {{1, 1, 1}, {3, 5, 7}, {4, 16, 16}, {17, 33, 65}, {64, 300, 40}, {129, 7, 257}};
    for (const auto [m, kk, n] : cases) {
      CAPTURE(m);
      CAPTURE(kk);
      CAPTURE(n);
      const auto a = test::random_values(m * kk, 1 + m);
      const auto b = test::random_values(kk * n, 2 + n);
      const auto c0 = test::random_values(m * n, 3);
      {
        auto s = c0, p = c0;
        k::serial::gemm_nn(m, kk, n, a, b, s);
        k::parallel::gemm_nn(m, kk, n, a, b, p);
        CHECK(max_rel_diff(p, s) < 1e-12);
      }
      {
        const auto bt = test::random_values(n * kk, 4);
        auto s = c0, p = c0;
        k::serial::gemm_nt(m, kk, n, a, bt, s);
        k::parallel::gemm_nt(m, kk, n, a, bt, p);
        CHECK(max_rel_diff(p, s) < 1e-12);
      }
      {
        const auto at = test::random_values(kk * m, 5);
        auto s = c0, p = c0;
        k::serial::gemm_tn(m, kk, n, at, b, s);
        k::parallel::gemm_tn(m, kk, n, at, b, p);
        CHECK(max_rel_diff(p, s) < 1e-12);
      }
    }
  }

  TEST_CASE("serial gemm matches the textbook triple loop") {
    const std::size_t m = 5, kk = 4, n = 3;
    const auto a = test::random_values(m * kk, 7);
    const auto b = test::random_values(kk * n, 8);
    std::vector<double> c(m * n, 0.0);
    k::serial::gemm_nn(m, kk, n, a, b, c);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (std::size_t t = 0; t < kk; ++t) ref += a[i * kk + t] * b[t * n + j];
        CHECK(c[i * n + j] == doctest::Approx(ref).epsilon(1e-14));
      }
  }

  TEST_CASE("parallel results do not depend on the thread count") {
    const std::size_t m = 70, kk = 300, n = 50;
    const auto a = test::random_values(m * kk, 11);
    const auto b = test::random_values(kk * n, 12);
    const int original = k::max_threads();
    std::vector<double> one(m * n, 0.0), many(m * n, 0.0);
    k::set_max_threads(1);
    k::parallel::gemm_nn(m, kk, n, a, b, one);
    k::set_max_threads(4);
    k::parallel::gemm_nn(m, kk, n, a, b, many);
    k::set_max_threads(original);
    CHECK(one == many);
  }

  TEST_CASE("nearest neighbour kernels agree and break ties low") {
    const auto q = test::random_cloud(200, 21).points;
    const auto r = test::random_cloud(150, 22).points;
    std::vector<double> ds(q.size()), dp(q.size());
    std::vector<std::uint32_t> is(q.size()), ip(q.size());
    k::serial::nearest_sq(q, r, ds, is);
    k::parallel::nearest_sq(q, r, dp, ip);
    CHECK(ds == dp);
    CHECK(is == ip);

    const std::vector<Vec3> refs{{1, 0, 0}, {-1, 0, 0}, {1, 0, 0}};
    const std::vector<Vec3> origin{{0, 0, 0}};
    std::vector<double> d(1);
    std::vector<std::uint32_t> idx(1);
    k::parallel::nearest_sq(origin, refs, d, idx);
    CHECK(d[0] == 1.0);
    CHECK(idx[0] == 0);
  }

  TEST_CASE("update_min_sq agrees") {
    const auto pts = test::random_cloud(500, 31).points;
    std::vector<double> s(pts.size(), 1e9), p(pts.size(), 1e9);
    for (const Vec3 pivot : {Vec3{0, 0, 0}, Vec3{0.5, -0.2, 0.1}}) {
      k::serial::update_min_sq(pts, pivot, s);
      k::parallel::update_min_sq(pts, pivot, p);
    }
    CHECK(s == p);
  }
}

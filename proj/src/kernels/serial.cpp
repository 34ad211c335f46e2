#include "psv/kernels/kernels.hpp"

#include <limits>

namespace psv::kernels::serial {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] += sum;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
      c[i * n + j] += sum;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * b[p * n + j];
      c[i * n + j] += sum;
    }
  }
}

void nearest_sq(std::span<const Vec3> queries, std::span<const Vec3> refs, std::span<double> out_sq,
                std::span<std::uint32_t> out_index) {
  for (std::size_t q = 0; q < queries.size(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_index = 0;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double d = squared_distance(queries[q], refs[r]);
      if (d < best) {
        best = d;
        best_index = static_cast<std::uint32_t>(r);
      }
    }
    out_sq[q] = best;
    out_index[q] = best_index;
  }
}

void update_min_sq(std::span<const Vec3> points, const Vec3& pivot, std::span<double> min_sq) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = squared_distance(points[i], pivot);
    if (d < min_sq[i]) min_sq[i] = d;
  }
}

}  // namespace psv::kernels::serial

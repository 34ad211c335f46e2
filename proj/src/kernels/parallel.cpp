#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "psv/kernels/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psv::kernels {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 16;
constexpr std::size_t kDepthBlock = 256;

// 4x16 register tile of C, accumulated over depth [k0, k1).
inline void tile_4x16(std::size_t k0, std::size_t k1, const double* a, std::size_t lda, const double* b,
                      std::size_t ldb, double* c, std::size_t ldc) {
  double acc[kRowBlock][kColBlock];
  for (std::size_t r = 0; r < kRowBlock; ++r)
    for (std::size_t j = 0; j < kColBlock; ++j) acc[r][j] = c[r * ldc + j];
  for (std::size_t p = k0; p < k1; ++p) {
    const double* brow = b + p * ldb;
    const double a0 = a[p];
    const double a1 = a[lda + p];
    const double a2 = a[2 * lda + p];
    const double a3 = a[3 * lda + p];
#pragma omp simd
    for (std::size_t j = 0; j < kColBlock; ++j) {
      acc[0][j] += a0 * brow[j];
      acc[1][j] += a1 * brow[j];
      acc[2][j] += a2 * brow[j];
      acc[3][j] += a3 * brow[j];
    }
  }
  for (std::size_t r = 0; r < kRowBlock; ++r)
    for (std::size_t j = 0; j < kColBlock; ++j) c[r * ldc + j] = acc[r][j];
}

inline void tile_edge(std::size_t rows, std::size_t cols, std::size_t k0, std::size_t k1, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* crow = c + r * ldc;
    for (std::size_t p = k0; p < k1; ++p) {
      const double av = a[r * lda + p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

std::vector<double> transpose(std::size_t rows, std::size_t cols, std::span<const double> src) {
  std::vector<double> out(rows * cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
  return out;
}

}  // namespace

namespace parallel {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  if (m == 0 || n == 0 || k == 0) return;
  const auto row_blocks = static_cast<std::ptrdiff_t>((m + kRowBlock - 1) / kRowBlock);
  for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
    const std::size_t k1 = std::min(k, k0 + kDepthBlock);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ib = 0; ib < row_blocks; ++ib) {
      const std::size_t i0 = static_cast<std::size_t>(ib) * kRowBlock;
      const std::size_t rows = std::min(kRowBlock, m - i0);
      for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
        const std::size_t cols = std::min(kColBlock, n - j0);
        const double* ap = a.data() + i0 * k;
        const double* bp = b.data() + j0;
        double* cp = c.data() + i0 * n + j0;
        if (rows == kRowBlock && cols == kColBlock)
          tile_4x16(k0, k1, ap, k, bp, n, cp, n);
        else
          tile_edge(rows, cols, k0, k1, ap, k, bp, n, cp, n);
      }
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  const std::vector<double> bt = transpose(n, k, b);
  gemm_nn(m, k, n, a, bt, c);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  const std::vector<double> at = transpose(k, m, a);
  gemm_nn(m, k, n, at, b, c);
}

void nearest_sq(std::span<const Vec3> queries, std::span<const Vec3> refs, std::span<double> out_sq,
                std::span<std::uint32_t> out_index) {
  const auto count = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < count; ++q) {
    const Vec3 query = queries[q];
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_index = 0;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double dx = query[0] - refs[r][0];
      const double dy = query[1] - refs[r][1];
      const double dz = query[2] - refs[r][2];
      const double d = dx * dx + dy * dy + dz * dz;
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
  const auto count = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const double dx = points[i][0] - pivot[0];
    const double dy = points[i][1] - pivot[1];
    const double dz = points[i][2] - pivot[2];
    min_sq[i] = std::min(min_sq[i], dx * dx + dy * dy + dz * dz);
  }
}

}  // namespace parallel

void set_max_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace psv::kernels

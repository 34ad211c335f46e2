#pragma once

// Data-parallel inner loops shared by the geometry and nn modules.
//
// Every kernel exists twice with identical signatures: `serial` is the plain
// reference used by tests, `parallel` is the OpenMP/cache-blocked version the
// library actually calls. Both are deterministic and independent of the thread
// count: each output element is produced by exactly one thread in a fixed order.
//
// Matrices are dense row-major arrays. All gemm variants accumulate (C += ...).

#include <cstddef>
#include <cstdint>
#include <span>

#include "psv/vec3.hpp"

namespace psv::kernels {

namespace serial {

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);

// For each query, squared distance to (and index of) the nearest reference point.
// Ties resolve to the lowest reference index.
void nearest_sq(std::span<const Vec3> queries, std::span<const Vec3> refs, std::span<double> out_sq,
                std::span<std::uint32_t> out_index);

// min_sq[i] = min(min_sq[i], |points[i] - pivot|^2)
void update_min_sq(std::span<const Vec3> points, const Vec3& pivot, std::span<double> min_sq);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);

void nearest_sq(std::span<const Vec3> queries, std::span<const Vec3> refs, std::span<double> out_sq,
                std::span<std::uint32_t> out_index);

void update_min_sq(std::span<const Vec3> points, const Vec3& pivot, std::span<double> min_sq);

}  // namespace parallel

/// Caps the OpenMP worker count; 0 leaves the runtime default. No-op without OpenMP.
void set_max_threads(int threads);
int max_threads();

}  // namespace psv::kernels

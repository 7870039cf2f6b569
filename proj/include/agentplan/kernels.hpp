#pragma once

// Data-parallel inner loops: embedding similarity scans and dominance checks.
// Each kernel has a scalar reference and, on x86-64, an AVX2 variant picked
// at runtime. The scalar versions define the semantics; SIMD variants must
// agree with them (bit-exact for the dominance kernel, within float
// reassociation error for dot products).

#include <cstddef>
#include <span>
#include <string_view>

namespace agentplan::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Best ISA supported by the running CPU and compiled into this build.
Isa detect_isa();

/// ISA used by the dispatching entry points below. Defaults to detect_isa().
Isa active_isa();

/// Overrides dispatch; used by equivalence tests and benchmarks. Requesting
/// an ISA the host cannot run falls back to Scalar.
void set_active_isa(Isa isa);

/// Column-major (objective-major) block of cost vectors: value of point j on
/// dimension d is data[d * stride + j].
struct CostColumns {
  const double* data = nullptr;
  std::size_t stride = 0;
  std::size_t dims = 0;
  std::size_t count = 0;
};

namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
void dot_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim, float* out);
bool any_dominates(const CostColumns& pts, const double* v, double eps);
} // namespace scalar

namespace avx2 {
float dot(const float* a, const float* b, std::size_t n);
void dot_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim, float* out);
bool any_dominates(const CostColumns& pts, const double* v, double eps);
} // namespace avx2

float dot(std::span<const float> a, std::span<const float> b);

/// out[i] = <query, rows[i * dim .. (i + 1) * dim)>
void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim, std::span<float> out);

/// True iff some point u in `pts` satisfies u[d] <= v[d] + eps for every d and
/// u[d] < v[d] - eps for at least one d.
bool any_dominates(const CostColumns& pts, const double* v, double eps);

} // namespace agentplan::kernels

#include "agentplan/kernels.hpp"

#include <atomic>
#include <cassert>

namespace agentplan::kernels {

namespace scalar {

float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void dot_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim, float* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot(query, rows + r * dim, dim);
}

bool any_dominates(const CostColumns& pts, const double* v, double eps) {
  for (std::size_t j = 0; j < pts.count; ++j) {
    bool weak = true;
    bool strict = false;
    for (std::size_t d = 0; d < pts.dims; ++d) {
      const double u = pts.data[d * pts.stride + j];
      if (u > v[d] + eps) {
        weak = false;
        break;
      }
      if (u < v[d] - eps) strict = true;
    }
    if (weak && strict) return true;
  }
  return false;
}

} // namespace scalar

#if !defined(AGENTPLAN_HAVE_AVX2)
namespace avx2 {
float dot(const float* a, const float* b, std::size_t n) { return scalar::dot(a, b, n); }
void dot_rows(const float* q, const float* rows, std::size_t n_rows, std::size_t dim, float* out) {
  scalar::dot_rows(q, rows, n_rows, dim, out);
}
bool any_dominates(const CostColumns& pts, const double* v, double eps) { return scalar::any_dominates(pts, v, eps); }
} // namespace avx2
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

Isa detect_isa() {
#if defined(AGENTPLAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has_avx2 = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (has_avx2) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

namespace {
std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{detect_isa()};
  return slot;
}
} // namespace

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::Avx2 && detect_isa() != Isa::Avx2) isa = Isa::Scalar;
  active_slot().store(isa, std::memory_order_relaxed);
}

float dot(std::span<const float> a, std::span<const float> b) {
  assert(a.size() == b.size());
  return active_isa() == Isa::Avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                   : scalar::dot(a.data(), b.data(), a.size());
}

void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim, std::span<float> out) {
  assert(query.size() == dim);
  const std::size_t n_rows = dim == 0 ? 0 : rows.size() / dim;
  assert(out.size() >= n_rows);
  if (active_isa() == Isa::Avx2)
    avx2::dot_rows(query.data(), rows.data(), n_rows, dim, out.data());
  else
    scalar::dot_rows(query.data(), rows.data(), n_rows, dim, out.data());
}

bool any_dominates(const CostColumns& pts, const double* v, double eps) {
  return active_isa() == Isa::Avx2 ? avx2::any_dominates(pts, v, eps) : scalar::any_dominates(pts, v, eps);
}

} // namespace agentplan::kernels

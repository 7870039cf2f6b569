#include "agentplan/kernels.hpp"

#include <immintrin.h>

namespace agentplan::kernels::avx2 {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

} // namespace

float dot(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void dot_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim, float* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot(query, rows + r * dim, dim);
}

// Four candidate points per iteration. A lane is "weak" while every dimension
// so far satisfies u <= v + eps and "strict" once some u < v - eps.
bool any_dominates(const CostColumns& pts, const double* v, double eps) {
  std::size_t j = 0;
  for (; j + 4 <= pts.count; j += 4) {
    __m256d weak = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
    __m256d strict = _mm256_setzero_pd();
    for (std::size_t d = 0; d < pts.dims; ++d) {
      const __m256d u = _mm256_loadu_pd(pts.data + d * pts.stride + j);
      const __m256d hi = _mm256_set1_pd(v[d] + eps);
      const __m256d lo = _mm256_set1_pd(v[d] - eps);
      weak = _mm256_and_pd(weak, _mm256_cmp_pd(u, hi, _CMP_LE_OQ));
      strict = _mm256_or_pd(strict, _mm256_cmp_pd(u, lo, _CMP_LT_OQ));
    }
    if (_mm256_movemask_pd(_mm256_and_pd(weak, strict)) != 0) return true;
  }
  if (j < pts.count) {
    CostColumns tail = pts;
    tail.data = pts.data + j;
    tail.count = pts.count - j;
    return scalar::any_dominates(tail, v, eps);
  }
  return false;
}

} // namespace agentplan::kernels::avx2

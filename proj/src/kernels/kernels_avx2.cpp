// Compiled with -mavx2 -mfma. Only reached after the dispatcher confirms
// CPU support.
#include <immintrin.h>

#include "confscore/kernels.hpp"
#include "scalar_math.hpp"

namespace confscore::kernels::avx2 {
namespace {

inline __m256d exp_v(__m256d x) {
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-kExpClamp)),
                    _mm256_set1_pd(kExpClamp));
  const __m256d n =
      _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);
  __m256d poly = _mm256_set1_pd(kExpCoeffs[0]);
  for (int k = 1; k < 14; ++k)
    poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(kExpCoeffs[k]));
  const __m256d magic = _mm256_set1_pd(kRoundMagic);
  const __m256i nbits = _mm256_castpd_si256(_mm256_add_pd(n, magic));
  __m256i ebits = _mm256_sub_epi64(nbits, _mm256_castpd_si256(magic));
  ebits = _mm256_slli_epi64(_mm256_add_epi64(ebits, _mm256_set1_epi64x(1023)),
                            52);
  return _mm256_mul_pd(poly, _mm256_castsi256_pd(ebits));
}

inline __m256d log1p_unit_v(__m256d t) {
  const __m256d s = _mm256_div_pd(t, _mm256_add_pd(_mm256_set1_pd(2.0), t));
  const __m256d s2 = _mm256_mul_pd(s, s);
  __m256d poly = _mm256_set1_pd(kAtanhCoeffs[0]);
  for (int k = 1; k < 18; ++k)
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(kAtanhCoeffs[k]));
  return _mm256_mul_pd(_mm256_add_pd(s, s), poly);
}

inline __m256d neg_abs(__m256d v) {
  return _mm256_or_pd(v, _mm256_set1_pd(-0.0));
}

struct ExpitV {
  __m256d p;
  __m256d t;
};

inline ExpitV expit_v(__m256d eta) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d t = exp_v(neg_abs(eta));
  const __m256d neg = _mm256_cmp_pd(eta, _mm256_setzero_pd(), _CMP_LT_OQ);
  const __m256d num = _mm256_blendv_pd(one, t, neg);
  return {_mm256_div_pd(num, _mm256_add_pd(one, t)), t};
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  for (; i < n; ++i) lanes[i & 3] = lanes[i & 3] + a[i] * b[i];
  return reduce_lanes(lanes);
}

double sum(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  for (; i < n; ++i) lanes[i & 3] = lanes[i & 3] + a[i];
  return reduce_lanes(lanes);
}

void expit_shift(const double* offset, const double* h, double eps,
                 double* out, std::size_t n) {
  const __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d eta = _mm256_fmadd_pd(veps, _mm256_loadu_pd(h + i),
                                        _mm256_loadu_pd(offset + i));
    _mm256_storeu_pd(out + i, expit_v(eta).p);
  }
  for (; i < n; ++i) out[i] = expit_parts(std::fma(eps, h[i], offset[i])).p;
}

LogisticSums logistic_path(const double* offset, const double* h,
                           const double* y, double eps, std::size_t n) {
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  __m256d score = zero, info = zero, loss = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d hv = _mm256_loadu_pd(h + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d eta = _mm256_fmadd_pd(veps, hv, _mm256_loadu_pd(offset + i));
    const ExpitV e = expit_v(eta);
    const __m256d resid = _mm256_sub_pd(yv, e.p);
    score = _mm256_add_pd(score, _mm256_mul_pd(hv, resid));
    info = _mm256_add_pd(
        info, _mm256_mul_pd(_mm256_mul_pd(hv, hv),
                            _mm256_mul_pd(e.p, _mm256_sub_pd(one, e.p))));
    const __m256d sp =
        _mm256_add_pd(_mm256_max_pd(eta, zero), log1p_unit_v(e.t));
    loss = _mm256_add_pd(loss, _mm256_sub_pd(sp, _mm256_mul_pd(yv, eta)));
  }
  double s[4], f[4], l[4];
  _mm256_storeu_pd(s, score);
  _mm256_storeu_pd(f, info);
  _mm256_storeu_pd(l, loss);
  for (; i < n; ++i) {
    const std::size_t lane = i & 3;
    logistic_path_element(offset[i], h[i], y[i], eps, s[lane], f[lane],
                          l[lane]);
  }
  return {reduce_lanes(s), reduce_lanes(f), reduce_lanes(l)};
}

}  // namespace confscore::kernels::avx2

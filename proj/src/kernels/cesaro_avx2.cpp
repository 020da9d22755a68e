// Copyright 2026 The patree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <immintrin.h>

#include <cmath>
#include <cstdint>

// No Eigen or other inline-heavy headers here: this file is built with
// -mavx2 and must not emit AVX2 copies of shared inline functions.
#include "patree/kernels.hpp"

namespace patree::kernels {
namespace {

// Vector log for positive normal doubles using the classic reduction
// x = 2^e * m, m in [sqrt(2)/2, sqrt(2)), and the minimax coefficients of
// fdlibm's e_log.c. Error below one ulp.
inline __m256d log_pd(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d sqrt2 = _mm256_set1_pd(1.41421356237309504880);
  const __m256d lg1 = _mm256_set1_pd(6.666666666666735130e-01);
  const __m256d lg2 = _mm256_set1_pd(3.999999999940941908e-01);
  const __m256d lg3 = _mm256_set1_pd(2.857142874366239149e-01);
  const __m256d lg4 = _mm256_set1_pd(2.222219843214978396e-01);
  const __m256d lg5 = _mm256_set1_pd(1.818357216161805012e-01);
  const __m256d lg6 = _mm256_set1_pd(1.531383769920937332e-01);
  const __m256d lg7 = _mm256_set1_pd(1.479819860511658591e-01);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);

  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

  // Biased exponent to double via the 2^52 trick.
  const __m256i magic_bits = _mm256_set1_epi64x(0x4330000000000000LL);
  const __m256d magic = _mm256_castsi256_pd(magic_bits);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(
          _mm256_or_si256(_mm256_srli_epi64(bits, 52), magic_bits)),
      magic);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

  const __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, half), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, one));

  const __m256d f = _mm256_sub_pd(m, one);
  const __m256d s = _mm256_div_pd(f, _mm256_add_pd(two, f));
  const __m256d z = _mm256_mul_pd(s, s);
  const __m256d w = _mm256_mul_pd(z, z);
  const __m256d t1 = _mm256_mul_pd(
      w, _mm256_fmadd_pd(w, _mm256_fmadd_pd(w, lg6, lg4), lg2));
  const __m256d t2 = _mm256_mul_pd(
      z, _mm256_fmadd_pd(w, _mm256_fmadd_pd(w, _mm256_fmadd_pd(w, lg7, lg5), lg3),
                         lg1));
  const __m256d r = _mm256_add_pd(t2, t1);
  const __m256d hfsq = _mm256_mul_pd(half, _mm256_mul_pd(f, f));
  // e*ln2_hi - ((hfsq - (s*(hfsq+R) + e*ln2_lo)) - f)
  const __m256d inner =
      _mm256_fmadd_pd(s, _mm256_add_pd(hfsq, r), _mm256_mul_pd(e, ln2_lo));
  const __m256d lo = _mm256_sub_pd(_mm256_sub_pd(hfsq, inner), f);
  return _mm256_sub_pd(_mm256_mul_pd(e, ln2_hi), lo);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void cesaro_accumulate_avx2(const CesaroBlock& block, double* acc) {
  const int d = block.dim;
  const int order = block.order;
  const std::size_t len = block.len;
  const std::size_t stride = block.stride;
  const double* sf = block.data;
  const int rows = order >= 2 ? cesaro_rows(d) : (order == 1 ? 1 + d : 1);

  __m256d vacc[1 + kAvx2MaxDim + kAvx2MaxDim * (kAvx2MaxDim + 1) / 2];
  for (int r = 0; r < rows; ++r) vacc[r] = _mm256_setzero_pd();
  __m256d ratio[kAvx2MaxDim];

  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d f = _mm256_loadu_pd(sf + i);
    vacc[0] = _mm256_add_pd(vacc[0], log_pd(f));
    if (order < 1) continue;
    const __m256d inv = _mm256_div_pd(one, f);
    for (int j = 0; j < d; ++j) {
      ratio[j] = _mm256_mul_pd(_mm256_loadu_pd(sf + (1 + j) * stride + i), inv);
      vacc[1 + j] = _mm256_add_pd(vacc[1 + j], ratio[j]);
    }
    if (order < 2) continue;
    int p = 0;
    for (int j = 0; j < d; ++j) {
      for (int l = j; l < d; ++l, ++p) {
        const __m256d h = _mm256_loadu_pd(sf + (1 + d + p) * stride + i);
        const __m256d term =
            _mm256_fnmadd_pd(ratio[j], ratio[l], _mm256_mul_pd(h, inv));
        vacc[1 + d + p] = _mm256_add_pd(vacc[1 + d + p], term);
      }
    }
  }
  for (int r = 0; r < rows; ++r) acc[r] += hsum(vacc[r]);

  if (i < len) {
    CesaroBlock rest = block;
    rest.data = block.data + i;
    rest.len = len - i;
    cesaro_accumulate_scalar(rest, acc);
  }
}

void log_array_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, log_pd(_mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = std::log(x[i]);
}

}  // namespace patree::kernels

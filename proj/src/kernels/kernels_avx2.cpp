// AVX2 kernels. Every arithmetic step mirrors the scalar reference in
// kernel_common.hpp: double fma for index generation, float fma lerps in the
// same association order, and blend-based accumulation so skipped lanes
// leave the sums untouched. Row tails fall through to the scalar helpers,
// which keeps scalar and AVX2 results bit-identical.

#include <immintrin.h>

#include "kernel_common.hpp"

namespace bxfuse::kernels {

namespace {

struct MappedBlock {
  __m256 mx, my, mz;     // continuous moving indices, float
  __m256 valid;          // all-ones float mask where inside bounds
};

inline MappedBlock map_block(const MovingView& mv, const RowMap& map, int i0) {
  const __m256d idx_lo = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(i0)),
                                       _mm256_setr_pd(0.0, 1.0, 2.0, 3.0));
  const __m256d idx_hi = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(i0)),
                                       _mm256_setr_pd(4.0, 5.0, 6.0, 7.0));

  auto axis = [&](int a) {
    const __m256d base = _mm256_set1_pd(map.base[a]);
    const __m256d step = _mm256_set1_pd(map.step[a]);
    const __m128 lo = _mm256_cvtpd_ps(_mm256_fmadd_pd(idx_lo, step, base));
    const __m128 hi = _mm256_cvtpd_ps(_mm256_fmadd_pd(idx_hi, step, base));
    return _mm256_insertf128_ps(_mm256_castps128_ps256(lo), hi, 1);
  };

  MappedBlock b;
  b.mx = axis(0);
  b.my = axis(1);
  b.mz = axis(2);

  const __m256 zero = _mm256_setzero_ps();
  auto inside = [&](__m256 m, int n) {
    return _mm256_and_ps(_mm256_cmp_ps(m, zero, _CMP_GE_OQ),
                         _mm256_cmp_ps(m, _mm256_set1_ps(static_cast<float>(n - 1)),
                                       _CMP_LE_OQ));
  };
  b.valid = _mm256_and_ps(_mm256_and_ps(inside(b.mx, mv.nx), inside(b.my, mv.ny)),
                          inside(b.mz, mv.nz));
  return b;
}

inline __m256 lerp8(__m256 a, __m256 b, __m256 t) {
  const __m256 one = _mm256_set1_ps(1.0f);
  return _mm256_fmadd_ps(t, b, _mm256_mul_ps(_mm256_sub_ps(one, t), a));
}

/// Trilinear interpolation of 8 mapped elements; invalid lanes produce 0.
inline __m256 gather_trilinear(const MovingView& mv, const MappedBlock& b) {
  auto cell = [&](__m256 m, int n) {
    const __m256 floored = _mm256_floor_ps(m);
    const __m256 capped = _mm256_min_ps(floored, _mm256_set1_ps(static_cast<float>(n - 2)));
    return capped;
  };
  const __m256 ixf = cell(b.mx, mv.nx);
  const __m256 iyf = cell(b.my, mv.ny);
  const __m256 izf = cell(b.mz, mv.nz);
  const __m256 fx = _mm256_sub_ps(b.mx, ixf);
  const __m256 fy = _mm256_sub_ps(b.my, iyf);
  const __m256 fz = _mm256_sub_ps(b.mz, izf);

  const __m256i ix = _mm256_cvtps_epi32(ixf);
  const __m256i iy = _mm256_cvtps_epi32(iyf);
  const __m256i iz = _mm256_cvtps_epi32(izf);
  const __m256i nx = _mm256_set1_epi32(mv.nx);
  const __m256i ny = _mm256_set1_epi32(mv.ny);

  __m256i base = _mm256_add_epi32(
      _mm256_mullo_epi32(_mm256_add_epi32(_mm256_mullo_epi32(iz, ny), iy), nx), ix);
  // Invalid lanes may hold garbage indices; zero them (the masked gather
  // also suppresses their memory access).
  base = _mm256_and_si256(base, _mm256_castps_si256(b.valid));

  const __m256i dy = nx;
  const __m256i dz = _mm256_mullo_epi32(nx, ny);
  const __m256i one = _mm256_set1_epi32(1);
  const __m256 zero = _mm256_setzero_ps();
  const float* d = mv.data;

  auto gather = [&](__m256i idx) {
    return _mm256_mask_i32gather_ps(zero, d, idx, b.valid, 4);
  };

  const __m256 c000 = gather(base);
  const __m256 c100 = gather(_mm256_add_epi32(base, one));
  const __m256 c010 = gather(_mm256_add_epi32(base, dy));
  const __m256 c110 = gather(_mm256_add_epi32(_mm256_add_epi32(base, dy), one));
  const __m256i base_z = _mm256_add_epi32(base, dz);
  const __m256 c001 = gather(base_z);
  const __m256 c101 = gather(_mm256_add_epi32(base_z, one));
  const __m256 c011 = gather(_mm256_add_epi32(base_z, dy));
  const __m256 c111 = gather(_mm256_add_epi32(_mm256_add_epi32(base_z, dy), one));

  const __m256 v00 = lerp8(c000, c100, fx);
  const __m256 v10 = lerp8(c010, c110, fx);
  const __m256 v01 = lerp8(c001, c101, fx);
  const __m256 v11 = lerp8(c011, c111, fx);
  const __m256 v0 = lerp8(v00, v10, fy);
  const __m256 v1 = lerp8(v01, v11, fy);
  return lerp8(v0, v1, fz);
}

/// Accumulate one 4-lane half into sink lanes [lane0, lane0+4).
inline void accumulate_half(MomentSink& sink, int lane0, __m128 f4, __m128 m4,
                            __m128i valid4) {
  const __m256d f = _mm256_cvtps_pd(f4);
  const __m256d m = _mm256_cvtps_pd(m4);
  const __m256d mask = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(valid4));
  const __m256d one = _mm256_set1_pd(1.0);

  auto update = [&](double* acc, __m256d next) {
    const __m256d cur = _mm256_loadu_pd(acc);
    _mm256_storeu_pd(acc, _mm256_blendv_pd(cur, next, mask));
  };

  double* n = sink.n + lane0;
  update(n, _mm256_add_pd(_mm256_loadu_pd(n), one));
  double* sf = sink.sf + lane0;
  update(sf, _mm256_add_pd(_mm256_loadu_pd(sf), f));
  double* sm = sink.sm + lane0;
  update(sm, _mm256_add_pd(_mm256_loadu_pd(sm), m));
  double* sff = sink.sff + lane0;
  update(sff, _mm256_fmadd_pd(f, f, _mm256_loadu_pd(sff)));
  double* smm = sink.smm + lane0;
  update(smm, _mm256_fmadd_pd(m, m, _mm256_loadu_pd(smm)));
  double* sfm = sink.sfm + lane0;
  update(sfm, _mm256_fmadd_pd(f, m, _mm256_loadu_pd(sfm)));
  const __m256d diff = _mm256_sub_pd(f, m);
  double* sdd = sink.sdd + lane0;
  update(sdd, _mm256_fmadd_pd(diff, diff, _mm256_loadu_pd(sdd)));
}

inline void accumulate_block(MomentSink& sink, __m256 f8, __m256 m8, __m256 valid8) {
  const __m256i vbits = _mm256_castps_si256(valid8);
  accumulate_half(sink, 0, _mm256_castps256_ps128(f8), _mm256_castps256_ps128(m8),
                  _mm256_castsi256_si128(vbits));
  accumulate_half(sink, 4, _mm256_extractf128_ps(f8, 1), _mm256_extractf128_ps(m8, 1),
                  _mm256_extracti128_si256(vbits, 1));
}

void resample_row_avx2(const MovingView& mv, const RowMap& map, int n,
                       float fill, float* out, std::uint8_t* valid) {
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const MappedBlock b = map_block(mv, map, i);
    const __m256 v = gather_trilinear(mv, b);
    const __m256 filled = _mm256_blendv_ps(_mm256_set1_ps(fill), v, b.valid);
    _mm256_storeu_ps(out + i, filled);
    const int bits = _mm256_movemask_ps(b.valid);
    for (int l = 0; l < 8; ++l) valid[i + l] = (bits >> l) & 1;
  }
  for (; i < n; ++i) {
    const detail::TriSample s = detail::sample_element(mv, map, i);
    out[i] = s.valid ? s.value : fill;
    valid[i] = s.valid ? 1 : 0;
  }
}

void moments_resample_row_avx2(const float* fixed_row, const MovingView& mv,
                               const RowMap& map, int n, MomentSink& sink) {
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const MappedBlock b = map_block(mv, map, i);
    const __m256 m8 = gather_trilinear(mv, b);
    const __m256 f8 = _mm256_loadu_ps(fixed_row + i);
    accumulate_block(sink, f8, m8, b.valid);
  }
  for (; i < n; ++i) {
    const detail::TriSample s = detail::sample_element(mv, map, i);
    if (s.valid) detail::accumulate_element(sink, i & 7, fixed_row[i], s.value);
  }
}

void moments_masked_row_avx2(const float* a, const float* b,
                             const std::uint8_t* mask, int n, MomentSink& sink) {
  const __m256i all = _mm256_set1_epi32(-1);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256i valid = all;
    if (mask) {
      const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i));
      valid = _mm256_cmpgt_epi32(_mm256_cvtepu8_epi32(bytes), _mm256_setzero_si256());
    }
    accumulate_block(sink, _mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i),
                     _mm256_castsi256_ps(valid));
  }
  for (; i < n; ++i) {
    if (mask && !mask[i]) continue;
    detail::accumulate_element(sink, i & 7, a[i], b[i]);
  }
}

void minmax_masked_row_avx2(const float* a, const std::uint8_t* mask, int n,
                            float& lo, float& hi) {
  __m256 vlo = _mm256_set1_ps(lo);
  __m256 vhi = _mm256_set1_ps(hi);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 x = _mm256_loadu_ps(a + i);
    if (mask) {
      const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i));
      const __m256 valid = _mm256_castsi256_ps(
          _mm256_cmpgt_epi32(_mm256_cvtepu8_epi32(bytes), _mm256_setzero_si256()));
      vlo = _mm256_min_ps(vlo, _mm256_blendv_ps(vlo, x, valid));
      vhi = _mm256_max_ps(vhi, _mm256_blendv_ps(vhi, x, valid));
    } else {
      vlo = _mm256_min_ps(vlo, x);
      vhi = _mm256_max_ps(vhi, x);
    }
  }
  alignas(32) float tmp[8];
  _mm256_storeu_ps(tmp, vlo);
  float l = lo;
  for (float v : tmp) l = std::min(l, v);
  _mm256_storeu_ps(tmp, vhi);
  float h = hi;
  for (float v : tmp) h = std::max(h, v);
  for (; i < n; ++i) {
    if (mask && !mask[i]) continue;
    l = std::min(l, a[i]);
    h = std::max(h, a[i]);
  }
  lo = l;
  hi = h;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{
      resample_row_avx2,
      moments_resample_row_avx2,
      moments_masked_row_avx2,
      minmax_masked_row_avx2,
  };
  return t;
}

}  // namespace bxfuse::kernels

#pragma once

// Element-wise reference semantics shared by all backends. The AVX2 kernels
// must mirror these operations instruction-for-instruction (fma, floor,
// clamp, lerp form) so scalar and vector paths stay bit-identical; tails of
// vectorized rows call straight into these helpers.

#include <algorithm>
#include <cmath>

#include "bxfuse/kernels.hpp"

namespace bxfuse::kernels::detail {

struct TriSample {
  float value;
  bool valid;
};

/// lerp(a,b,t) = fma(t, b, (1-t)*a): exact at t=0 and t=1.
inline float lerp(float a, float b, float t) {
  return std::fma(t, b, (1.0f - t) * a);
}

/// Trilinear sample of element i of a mapped row.
inline TriSample sample_element(const MovingView& mv, const RowMap& map, int i) {
  const float mx = static_cast<float>(std::fma(static_cast<double>(i), map.step[0], map.base[0]));
  const float my = static_cast<float>(std::fma(static_cast<double>(i), map.step[1], map.base[1]));
  const float mz = static_cast<float>(std::fma(static_cast<double>(i), map.step[2], map.base[2]));

  if (!(mx >= 0.0f && mx <= static_cast<float>(mv.nx - 1) &&
        my >= 0.0f && my <= static_cast<float>(mv.ny - 1) &&
        mz >= 0.0f && mz <= static_cast<float>(mv.nz - 1))) {
    return {0.0f, false};
  }

  // Upper-edge indices collapse onto the last cell with frac = 1.
  const int ix = std::min(static_cast<int>(std::floor(mx)), mv.nx - 2);
  const int iy = std::min(static_cast<int>(std::floor(my)), mv.ny - 2);
  const int iz = std::min(static_cast<int>(std::floor(mz)), mv.nz - 2);
  const float fx = mx - static_cast<float>(ix);
  const float fy = my - static_cast<float>(iy);
  const float fz = mz - static_cast<float>(iz);

  const float* d = mv.data;
  const long long base = (static_cast<long long>(iz) * mv.ny + iy) * mv.nx + ix;
  const long long dy = mv.nx;
  const long long dz = static_cast<long long>(mv.nx) * mv.ny;

  const float c000 = d[base];
  const float c100 = d[base + 1];
  const float c010 = d[base + dy];
  const float c110 = d[base + dy + 1];
  const float c001 = d[base + dz];
  const float c101 = d[base + dz + 1];
  const float c011 = d[base + dz + dy];
  const float c111 = d[base + dz + dy + 1];

  const float v00 = lerp(c000, c100, fx);
  const float v10 = lerp(c010, c110, fx);
  const float v01 = lerp(c001, c101, fx);
  const float v11 = lerp(c011, c111, fx);
  const float v0 = lerp(v00, v10, fy);
  const float v1 = lerp(v01, v11, fy);
  return {lerp(v0, v1, fz), true};
}

inline void accumulate_element(MomentSink& sink, int lane, float fv, float mv) {
  const double f = static_cast<double>(fv);
  const double m = static_cast<double>(mv);
  sink.n[lane] += 1.0;
  sink.sf[lane] += f;
  sink.sm[lane] += m;
  sink.sff[lane] = std::fma(f, f, sink.sff[lane]);
  sink.smm[lane] = std::fma(m, m, sink.smm[lane]);
  sink.sfm[lane] = std::fma(f, m, sink.sfm[lane]);
  const double diff = f - m;
  sink.sdd[lane] = std::fma(diff, diff, sink.sdd[lane]);
}

}  // namespace bxfuse::kernels::detail

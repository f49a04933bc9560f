// Scalar reference kernels. These define the ground-truth arithmetic the
// SIMD variants are equivalence-tested against.

#include "kernel_common.hpp"

namespace bxfuse::kernels {

namespace {

void resample_row_scalar(const MovingView& mv, const RowMap& map, int n,
                         float fill, float* out, std::uint8_t* valid) {
  for (int i = 0; i < n; ++i) {
    const detail::TriSample s = detail::sample_element(mv, map, i);
    out[i] = s.valid ? s.value : fill;
    valid[i] = s.valid ? 1 : 0;
  }
}

void moments_resample_row_scalar(const float* fixed_row, const MovingView& mv,
                                 const RowMap& map, int n, MomentSink& sink) {
  for (int i = 0; i < n; ++i) {
    const detail::TriSample s = detail::sample_element(mv, map, i);
    if (s.valid) detail::accumulate_element(sink, i & 7, fixed_row[i], s.value);
  }
}

void moments_masked_row_scalar(const float* a, const float* b,
                               const std::uint8_t* mask, int n,
                               MomentSink& sink) {
  for (int i = 0; i < n; ++i) {
    if (mask && !mask[i]) continue;
    detail::accumulate_element(sink, i & 7, a[i], b[i]);
  }
}

void minmax_masked_row_scalar(const float* a, const std::uint8_t* mask, int n,
                              float& lo, float& hi) {
  float l = lo, h = hi;
  for (int i = 0; i < n; ++i) {
    if (mask && !mask[i]) continue;
    l = std::min(l, a[i]);
    h = std::max(h, a[i]);
  }
  lo = l;
  hi = h;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{
      resample_row_scalar,
      moments_resample_row_scalar,
      moments_masked_row_scalar,
      minmax_masked_row_scalar,
  };
  return t;
}

}  // namespace bxfuse::kernels

#pragma once

// Inner-loop kernels behind volume resampling and similarity reductions.
// Each kernel exists as a scalar reference and, on x86-64, an AVX2 variant
// selected at runtime. The two are bit-identical by construction: index
// arithmetic in double, interpolation in float with fixed fma/lerp forms,
// and reductions kept as 8 per-lane double partials (element i -> lane i%8)
// that finalize() combines in a fixed pairwise order.

#include <cstdint>

namespace bxfuse::kernels {

enum class Backend { scalar, avx2 };

/// Backend chosen at startup (env BXFUSE_KERNELS={scalar|avx2} overrides).
Backend active_backend();
bool backend_supported(Backend b);
/// Force a backend; throws bxfuse::Error if unsupported on this machine.
void set_backend(Backend b);
const char* backend_name(Backend b);

/// Read-only view of the moving volume's raw grid.
struct MovingView {
  const float* data = nullptr;
  int nx = 0, ny = 0, nz = 0;
};

/// Affine map from an output row to moving index space: the continuous
/// moving index of element i is fma(i, step, base) per axis, evaluated in
/// double and rounded to float before interpolation.
struct RowMap {
  double base[3];
  double step[3];
};

/// 8-lane running sums for one reduction; element i of every row feeds
/// lane i % 8. Bitwise identical across backends and thread counts.
struct MomentSink {
  double n[8]{};
  double sf[8]{};
  double sm[8]{};
  double sff[8]{};
  double smm[8]{};
  double sfm[8]{};
  double sdd[8]{};

  MomentSink& operator+=(const MomentSink& o);
};

struct Moments {
  double n = 0, sf = 0, sm = 0, sff = 0, smm = 0, sfm = 0, sdd = 0;
};

/// Combine the 8 lanes in fixed pairwise order: ((0+1)+(2+3))+((4+5)+(6+7)).
Moments finalize(const MomentSink& s);

struct KernelTable {
  /// Trilinear-sample one output row from the moving volume. Elements whose
  /// continuous index leaves [0, dim-1] on any axis get `fill`, valid[i]=0.
  void (*resample_row)(const MovingView& mv, const RowMap& map, int n,
                       float fill, float* out, std::uint8_t* valid);

  /// Fused registration path: sample the moving row and accumulate moments
  /// against fixed_row, skipping out-of-bounds samples.
  void (*moments_resample_row)(const float* fixed_row, const MovingView& mv,
                               const RowMap& map, int n, MomentSink& sink);

  /// Moments of two materialized rows under a byte mask; mask == nullptr
  /// means every element is valid.
  void (*moments_masked_row)(const float* a, const float* b,
                             const std::uint8_t* mask, int n, MomentSink& sink);

  /// Masked running min/max of one row (lo/hi updated in place).
  void (*minmax_masked_row)(const float* a, const std::uint8_t* mask, int n,
                            float& lo, float& hi);
};

/// Kernel table of the active backend.
const KernelTable& table();
/// Kernel table of an explicit backend (equivalence tests).
const KernelTable& table(Backend b);

}  // namespace bxfuse::kernels

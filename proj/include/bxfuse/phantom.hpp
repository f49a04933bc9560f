#pragma once

// Synthetic ultrasound-like prostate phantoms with exact ground truth:
// ellipsoidal gland over background, multiplicative smoothed speckle,
// bright calcifications, optional needle track. Deterministic per seed
// regardless of thread count (per-voxel counter-based noise).

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "bxfuse/geometry.hpp"
#include "bxfuse/volume.hpp"

namespace bxfuse {

struct NeedleSpec {
  Vec3 entry;            // mm, volume world frame
  Vec3 tip;              // mm
  double radius_mm = 0.5;
  double level = 210.0;  // rendered track intensity
};

struct PhantomConfig {
  std::array<int, 3> dims{128, 128, 128};
  Vec3 spacing{0.6, 0.6, 0.6};
  Vec3 origin{0.0, 0.0, 0.0};
  // Semi-axes sized so the default ellipsoid volume is ~39 cc; the supported
  // clinical range is roughly 20-115 cc. Distinctly anisotropic, so the
  // gland shape itself constrains rotation.
  Vec3 semi_axes{25.0, 17.5, 21.3};
  double background_level = 35.0;
  double gland_level = 100.0;
  // Interior transition-zone dip as a fraction of the gland/background
  // contrast (hypoechoic zonal anatomy; also anchors rotation).
  double zone_contrast = 0.3;
  // Anatomy-locked heterogeneous echotexture inside the gland, as a fraction
  // of the gland/background contrast. Unlike speckle it moves with the
  // anatomy between acquisitions, which is what makes rotation observable.
  double texture_contrast = 0.18;
  double texture_scale_mm = 5.0;
  double speckle_sigma = 0.2;        // std of the multiplicative field
  double smoothing_radius_mm = 1.2;  // edge softness of rendered structures
  int n_calcifications = 5;
  double calc_radius_min_mm = 1.0;
  double calc_radius_max_mm = 2.0;
  double calc_level = 235.0;
  std::optional<NeedleSpec> needle;
  std::uint64_t seed = 1;

  /// Scale semi-axes so the ellipsoid volume matches `cc` cm^3.
  void set_gland_volume_cc(double cc);
  void validate() const;
};

struct GroundTruth {
  Vec3 ellipsoid_center;
  Vec3 semi_axes;                 // of the base (unrotated) ellipsoid
  std::array<Vec3, 2> bbox;       // tight axis-aligned box, this volume's frame
  std::vector<Vec3> calcifications;
  std::optional<std::array<Vec3, 2>> needle;  // entry, tip
  RigidTransform fused_transform; // reference -> this volume (identity for the base)
};

/// Render the base phantom. Same (cfg, seed) gives bit-identical output.
std::pair<Volume3D, GroundTruth> generate(const PhantomConfig& cfg, int threads = 1);

/// Re-render the scene mapped by t with fresh speckle (new_seed), simulating
/// the post-biopsy re-acquisition under probe/patient motion. truth must be
/// the output of generate() or a previous perturb() of the same scene.
std::pair<Volume3D, GroundTruth> perturb(const PhantomConfig& cfg,
                                         const GroundTruth& truth,
                                         const RigidTransform& t,
                                         std::uint64_t new_seed, int threads = 1);

}  // namespace bxfuse

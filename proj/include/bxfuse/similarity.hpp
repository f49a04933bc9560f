#pragma once

// Gray-level similarity between a fixed volume and a moved/resampled one,
// computed only over the validity mask so zero-fill never fakes agreement.

#include <cstdint>
#include <string>
#include <vector>

#include "bxfuse/kernels.hpp"
#include "bxfuse/volume.hpp"

namespace bxfuse {

struct SimilarityKind {
  enum class Type { ssd, ncc, nmi };
  Type type = Type::ncc;
  int bins = 32;  // NMI histogram bins, in [8, 256]

  static SimilarityKind ssd() { return {Type::ssd, 32}; }
  static SimilarityKind ncc() { return {Type::ncc, 32}; }
  static SimilarityKind nmi(int bins = 32) { return {Type::nmi, bins}; }

  void validate() const;
  std::string name() const;
  static SimilarityKind parse(const std::string& name, int bins = 32);
};

/// Mean squared intensity difference over masked voxels (0 iff identical).
double ssd(const Volume3D& fixed, const Volume3D& moved,
           const std::vector<std::uint8_t>& mask, int threads = 1);

/// Pearson correlation of masked intensities, in [-1, 1].
double ncc(const Volume3D& fixed, const Volume3D& moved,
           const std::vector<std::uint8_t>& mask, int threads = 1);

/// Normalized mutual information (H(F)+H(M))/H(F,M) from a bins x bins
/// equal-width joint histogram over each image's masked min-max range.
double nmi(const Volume3D& fixed, const Volume3D& moved,
           const std::vector<std::uint8_t>& mask, int bins = 32, int threads = 1);

double evaluate(const SimilarityKind& kind, const Volume3D& fixed,
                const Volume3D& moved, const std::vector<std::uint8_t>& mask,
                int threads = 1);

/// Fused path used by iconic registration: accumulate similarity moments of
/// `moving` mapped onto `fixed`'s grid by t, without materializing the
/// resampled volume. Sampling semantics identical to resample().
kernels::Moments transformed_moments(const Volume3D& fixed, const Volume3D& moving,
                                     const RigidTransform& t, int threads = 1);

double ncc_from_moments(const kernels::Moments& m);
double mean_ssd_from_moments(const kernels::Moments& m);

}  // namespace bxfuse

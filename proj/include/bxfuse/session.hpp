#pragma once

// Session orchestration: the R0 + N-volume fusion protocol, file schemas,
// phantom session synthesis, and report emission.

#include <optional>
#include <string>
#include <vector>

#include "bxfuse/biopsy_map.hpp"
#include "bxfuse/phantom.hpp"
#include "bxfuse/registration.hpp"
#include "bxfuse/validation.hpp"

namespace bxfuse {

struct BiopsyEntry {
  int index = 0;  // unique, 1-based
  std::string volume_path;
  NeedleTrajectory trajectory;          // annotated in the volume's own frame
  bool left_lobe = false;               // acquired with the 180 deg probe turn
  std::vector<FiducialPair> fiducials;  // optional accuracy landmarks
};

struct SessionConfig {
  std::string reference_path;  // R0 volume
  Box3 bbox;                   // prostate bounding box in the R0 frame
  RegistrationConfig registration;
  std::vector<BiopsyEntry> biopsies;
  int jobs = 0;  // biopsy-level worker pool; 0 = logical cores

  void validate() const;
  static SessionConfig from_json_file(const std::string& path);
  static SessionConfig from_json_text(const std::string& text,
                                      const std::string& base_dir = "");
  std::string to_json_text() const;
};

struct BiopsyOutcome {
  int index = 0;
  std::string volume_path;
  bool left_lobe = false;
  std::optional<RegistrationResult> registration;  // absent on file error
  std::string error;                               // per-file error, collected
  std::optional<NeedleTrajectory> trajectory_in_r0;
  std::optional<FiducialErrorStats> fiducial;
};

struct SessionOutcome {
  std::vector<BiopsyOutcome> biopsies;  // in config order
  MetricsReport report;
  int n_succeeded = 0;
  int n_failed = 0;  // registration ran but did not succeed
  int n_errors = 0;  // volume could not be read
  double mean_registration_seconds = 0.0;
  std::optional<double> fiducial_mean_mm;
  std::optional<double> fiducial_max_mm;
};

/// Register every biopsy volume to R0 (honoring per-biopsy left-lobe flags),
/// map trajectories, build the 12-cell grid from the bbox, and score the
/// session. Per-file errors are collected, not fail-fast. Deterministic for
/// fixed inputs, independent of the worker-pool size.
SessionOutcome run_session(const SessionConfig& cfg);

std::string summary_text(const SessionOutcome& outcome);
std::string outcome_to_json_text(const SessionConfig& cfg, const SessionOutcome& outcome);
/// Re-read the metrics report embedded in a results JSON.
MetricsReport report_from_results_json(const std::string& text);

// ---------------------------------------------------------------------------
// Phantom sessions: R0 plus N perturbed re-acquisitions with ground truth.
// ---------------------------------------------------------------------------

struct PhantomSessionConfig {
  PhantomConfig base;            // R0 phantom (needle ignored; set per biopsy)
  int n_biopsies = 12;
  double max_rotation_deg = 8.0;     // per-biopsy pose perturbation
  double max_translation_mm = 6.0;
  double core_length_mm = 20.0;
  std::uint64_t seed = 1;
};

struct PhantomBiopsy {
  Volume3D volume;
  GroundTruth truth;            // fused_transform = true R0 -> volume map
  NeedleTrajectory trajectory;  // in the biopsy volume's frame
  bool left_lobe = false;
  std::vector<FiducialPair> fiducials;  // calcification pairs R0 <-> volume
};

struct PhantomSession {
  Volume3D reference;
  GroundTruth reference_truth;
  Box3 bbox;
  std::vector<PhantomBiopsy> biopsies;
};

/// Synthesize a full session: biopsy i targets the i-th grid cell, left-side
/// targets are acquired with the probe turned (left_lobe = true) and their
/// pose perturbation includes that 180 deg turn.
PhantomSession build_phantom_session(const PhantomSessionConfig& cfg, int threads = 1);

/// Write volumes (BVOL1), session.json, and truth.json into dir; returns the
/// session config path.
std::string write_phantom_session(const PhantomSession& session,
                                  const PhantomSessionConfig& cfg,
                                  const std::string& dir);

}  // namespace bxfuse

// Acceptance suite: runs every acceptance criterion end to end on synthetic
// phantoms and prints one PASS/FAIL line per criterion. Returns the number
// of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bxfuse/biopsy_map.hpp"
#include "bxfuse/phantom.hpp"
#include "bxfuse/registration.hpp"
#include "bxfuse/rng.hpp"
#include "bxfuse/session.hpp"
#include "bxfuse/similarity.hpp"
#include "bxfuse/validation.hpp"
#include "support/table2.hpp"
#include "support/test_util.hpp"

using namespace bxfuse;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;
  void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", id, name,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

PhantomConfig patient_config(int patient) {
  static const double volumes_cc[4] = {25.0, 39.0, 55.0, 80.0};
  const double cc = volumes_cc[patient % 4];
  PhantomConfig cfg;  // default 128^3 at 0.6 mm
  cfg.seed = 1000 + 17 * patient;
  cfg.set_gland_volume_cc(cc);
  // Field of view follows gland size, the way an operator would set depth;
  // dims stay at the default 128^3.
  const double fov_scale = std::cbrt(cc / 39.0);
  cfg.spacing = cfg.spacing * fov_scale;
  return cfg;
}

struct SuiteRun {
  bool succeeded = false;
  double fiducial_mean = 0.0;
  double fiducial_max = 0.0;
};

/// Criteria 1 and 2: the 50-run registration suite.
void run_suite(Harness& h) {
  const double t0 = now_seconds();
  SplitMix rng(0xacce97a2ce5eedULL);

  int succeeded = 0;
  double fid_sum = 0.0, fid_max = 0.0;
  std::size_t fid_n = 0;
  int runs = 0;
  const int per_patient[4] = {13, 13, 12, 12};

  for (int patient = 0; patient < 4; ++patient) {
    const PhantomConfig cfg = patient_config(patient);
    const auto [fixed, truth] = generate(cfg, 2);
    const Vec3 center = fixed.world_center();
    const Quat probe_turn = Quat::from_rotation_vector({0, 0, kPi});

    for (int k = 0; k < per_patient[patient]; ++k) {
      ++runs;
      const bool left_lobe = (runs % 4 == 0);

      auto random_dir = [&rng]() {
        while (true) {
          const Vec3 v{rng.range(-1, 1), rng.range(-1, 1), rng.range(-1, 1)};
          const double n2 = v.dot(v);
          if (n2 > 1e-4 && n2 <= 1.0) return v / std::sqrt(n2);
        }
      };
      const double angle_deg = rng.range(2.0, 10.0);
      const double shift_mm = rng.range(2.0, 8.0);
      const RigidTransform small =
          about_center(Quat::from_rotation_vector(random_dir() * (angle_deg * kDegToRad)),
                       center, random_dir() * shift_mm);
      const RigidTransform t_true =
          left_lobe ? compose(about_center(probe_turn, center), small) : small;

      const auto [moving, moved_truth] =
          perturb(cfg, truth, t_true, cfg.seed + 100 + k, 2);

      RegistrationConfig reg;
      reg.left_lobe_mode = left_lobe;
      reg.threads = 2;
      const RegistrationResult r = register_iconic(fixed, moving, reg);
      if (!r.succeeded) continue;
      ++succeeded;

      std::vector<FiducialPair> pairs;
      for (std::size_t i = 0; i < truth.calcifications.size(); ++i)
        pairs.push_back({truth.calcifications[i], moved_truth.calcifications[i], ""});
      const auto err = fiducial_error(pairs, r.transform);
      fid_sum += err.mean_mm * pairs.size();
      fid_n += pairs.size();
      fid_max = std::max(fid_max, err.max_mm);
    }
  }

  const double elapsed = now_seconds() - t0;
  const double rate = 100.0 * succeeded / runs;
  h.report(1, "registration success rate",
           succeeded >= 48 && runs == 50 && elapsed <= 300.0,
           fmt("%d/%d succeeded (%.0f%%, need >=96%%), suite took %.1f s "
               "(budget 300 s)",
               succeeded, runs, rate, elapsed));

  const double fid_mean = fid_n ? fid_sum / fid_n : 1e9;
  h.report(2, "fusion accuracy on calcifications",
           fid_n > 0 && fid_mean <= 1.5 && fid_max <= 3.9,
           fmt("mean %.2f mm (<= 1.5), max %.2f mm (<= 3.9) over %zu fiducials",
               fid_mean, fid_max, fid_n));
}

void run_speed(Harness& h) {
  const PhantomConfig cfg = patient_config(1);
  const auto [fixed, truth] = generate(cfg, 2);
  const RigidTransform t_true = about_center(
      Quat::from_rotation_vector(Vec3{0.6, -0.5, 0.4}.normalized() * (6.0 * kDegToRad)),
      fixed.world_center(), Vec3{3.0, -2.5, 2.0});
  const auto [moving, moved_truth] = perturb(cfg, truth, t_true, 4242, 2);

  RegistrationConfig reg;
  reg.threads = 2;
  const RegistrationResult r = register_iconic(fixed, moving, reg);
  h.report(3, "single 128^3 registration speed",
           r.succeeded && r.elapsed_seconds <= 6.0,
           fmt("%.2f s (<= 6 s), succeeded=%s", r.elapsed_seconds,
               r.succeeded ? "true" : "false"));
}

void run_duplicated_needle(Harness& h) {
  // Exactness of the angle metric itself on constructed rotations.
  bool exact_ok = true;
  for (const double angle : {0.5, 1.0, 4.0, 10.0, 45.0}) {
    NeedleTrajectory a;
    a.entry = {0, 0, 0};
    a.tip = {0, 0, 30};
    a.core_length_mm = 20;
    const RigidTransform rot = from_euler(angle, 0, 0, 0, 0, 0);
    NeedleTrajectory b = a;
    b.entry = apply_point(rot, a.entry);
    b.tip = apply_point(rot, a.tip);
    if (std::abs(trajectory_angle(a, b) - angle) > 1e-6) exact_ok = false;
  }

  const PhantomConfig cfg = patient_config(1);
  PhantomConfig base = cfg;
  base.seed = 7777;
  const auto [fixed, truth] = generate(base, 2);
  const Vec3 center = fixed.world_center();

  SplitMix rng(0xdeadULL);
  auto random_dir = [&rng]() {
    while (true) {
      const Vec3 v{rng.range(-1, 1), rng.range(-1, 1), rng.range(-1, 1)};
      const double n2 = v.dot(v);
      if (n2 > 1e-4 && n2 <= 1.0) return v / std::sqrt(n2);
    }
  };

  double sum = 0.0, mx = 0.0;
  int pairs_done = 0;
  for (int pair = 0; pair < 10; ++pair) {
    // The same physical needle, seen in two independently perturbed volumes.
    PhantomConfig needle_cfg = base;
    NeedleSpec spec;
    spec.entry = center + Vec3{rng.range(-6, 6), rng.range(-6, 6), -30.0};
    spec.tip = center + Vec3{rng.range(-8, 8), rng.range(-8, 8), rng.range(8, 16)};
    needle_cfg.needle = spec;

    RegistrationResult est[2];
    NeedleTrajectory mapped[2];
    bool ok = true;
    for (int side = 0; side < 2; ++side) {
      const RigidTransform t_true = about_center(
          Quat::from_rotation_vector(random_dir() * (rng.range(2.0, 8.0) * kDegToRad)),
          center, random_dir() * rng.range(2.0, 6.0));
      const auto [vol, vol_truth] =
          perturb(needle_cfg, truth, t_true, 9000 + 10 * pair + side, 2);

      RegistrationConfig reg;
      reg.threads = 2;
      est[side] = register_iconic(fixed, vol, reg);
      if (!est[side].succeeded) {
        ok = false;
        break;
      }
      NeedleTrajectory in_volume;
      in_volume.entry = (*vol_truth.needle)[0];
      in_volume.tip = (*vol_truth.needle)[1];
      in_volume.core_length_mm = 20.0;
      mapped[side] = map_trajectory(in_volume, invert(est[side].transform));
    }
    if (!ok) continue;
    const double angle = trajectory_angle(mapped[0], mapped[1]);
    sum += angle;
    mx = std::max(mx, angle);
    ++pairs_done;
  }

  const double mean = pairs_done ? sum / pairs_done : 1e9;
  h.report(4, "duplicated-needle angular error",
           exact_ok && pairs_done == 10 && mean <= 4.0 && mx <= 10.0,
           fmt("mean %.2f deg (<= 4), max %.2f deg (<= 10) over %d pairs; "
               "constructed rotations exact to 1e-6: %s",
               mean, mx, pairs_done, exact_ok ? "yes" : "no"));
}

void run_table2(Harness& h) {
  const TargetGrid grid(test::table2_bbox());
  const MetricsReport report = evaluate_session(test::table2_records(grid), grid);
  const std::string csv = report_to_csv(report);

  const bool ok = csv.find("BL,29,16,55,13,61\n") != std::string::npos &&
                  csv.find("BP,28,17,61,14,62\n") != std::string::npos &&
                  csv.find("ML,29,23,79,14,64\n") != std::string::npos &&
                  csv.find("MP,29,29,100,16,71\n") != std::string::npos &&
                  csv.find("AL,29,9,31,7,33\n") != std::string::npos &&
                  csv.find("AP,28,14,50,13,61\n") != std::string::npos &&
                  csv.find("TOTAL,172,108,63,14,62\n") != std::string::npos;
  h.report(5, "published-table arithmetic reproduction", ok,
           ok ? "all 6 target rows and the TOTAL row match exactly"
              : "derived columns diverge from the published values:\n" + csv);
}

void run_geometry_oracles(Harness& h) {
  std::mt19937 rng(606);

  // Segment clipping vs a deterministic 1e5-point sampling oracle.
  int clip_bad = 0;
  std::uniform_real_distribution<double> lo(-30.0, 10.0), ext(4.0, 30.0),
      pt(-35.0, 35.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 mn{lo(rng), lo(rng), lo(rng)};
    const Box3 box{mn, mn + Vec3{ext(rng), ext(rng), ext(rng)}};
    const Vec3 a{pt(rng), pt(rng), pt(rng)};
    const Vec3 b{pt(rng), pt(rng), pt(rng)};
    const Vec3 d = b - a;
    if (d.norm() < 1e-6) continue;
    const int samples = 100000;
    long inside = 0;
    for (int s = 0; s < samples; ++s) {
      const double t = (s + 0.5) / samples;
      if (box.contains(a + d * t)) ++inside;
    }
    const double oracle = d.norm() * inside / samples;
    if (std::abs(segment_box_length(a, b, box) - oracle) > 0.1) ++clip_bad;
  }

  // Paired-point recovery to 1e-9.
  int fit_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform truth = test::random_transform(rng);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    for (int i = 0; i < 4; ++i) {
      const Vec3 f = test::random_point(rng);
      pairs.emplace_back(f, apply_point(truth, f));
    }
    const RigidTransform fit = register_paired_points(pairs);
    for (int i = 0; i < 25; ++i) {
      const Vec3 p = test::random_point(rng);
      if ((apply_point(fit, p) - apply_point(truth, p)).norm() > 1e-9) {
        ++fit_bad;
        break;
      }
    }
  }

  // Group laws to 1e-9.
  int law_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform a = test::random_transform(rng);
    const RigidTransform b = test::random_transform(rng);
    const RigidTransform c = test::random_transform(rng);
    const RigidTransform lhs = compose(compose(a, b), c);
    const RigidTransform rhs = compose(a, compose(b, c));
    const RigidTransform cancel = compose(a, invert(a));
    for (int i = 0; i < 25; ++i) {
      const Vec3 p = test::random_point(rng);
      if ((apply_point(lhs, p) - apply_point(rhs, p)).norm() > 1e-9 ||
          (apply_point(cancel, p) - p).norm() > 1e-9) {
        ++law_bad;
        break;
      }
    }
  }

  h.report(6, "geometry/clipping oracle equivalence",
           clip_bad == 0 && fit_bad == 0 && law_bad == 0,
           fmt("clipping mismatches %d/1000 (tol 0.1 mm), point-fit failures "
               "%d/100 (tol 1e-9), group-law failures %d/100 (tol 1e-9)",
               clip_bad, fit_bad, law_bad));
}

void run_similarity_properties(Harness& h) {
  std::mt19937 rng(707);
  Volume3D a = test::random_volume({48, 48, 48}, rng);
  const bool ssd_ok = ssd(a, a, {}) == 0.0;

  Volume3D affine = a;
  for (auto& x : affine.data) x = 3.2f * x + 9.0f;
  const double ncc_affine = ncc(a, affine, {});
  const bool ncc_ok = std::abs(ncc_affine - 1.0) < 1e-6;

  Volume3D n1 = test::random_volume({64, 64, 64}, rng);
  Volume3D n2 = test::random_volume({64, 64, 64}, rng);
  const double nmi_noise = nmi(n1, n2, {}, 32);
  const bool nmi_ok = std::abs(nmi_noise - 1.0) < 0.05;

  // Argmin invariance under positive affine rescaling of the moving image.
  PhantomConfig cfg;
  cfg.dims = {64, 64, 64};
  cfg.spacing = {1.0, 1.0, 1.0};
  cfg.seed = 321;
  cfg.set_gland_volume_cc(30.0);
  const auto [fixed, truth] = generate(cfg, 2);
  const RigidTransform t_true = about_center(
      Quat::from_rotation_vector({0.04, -0.06, 0.05}), fixed.world_center(),
      Vec3{2.0, 1.5, -2.5});
  const auto [moving, moved_truth] = perturb(cfg, truth, t_true, 999, 2);
  Volume3D rescaled = moving;
  for (auto& x : rescaled.data) x = 1.6f * x + 21.0f;

  RegistrationConfig reg;
  reg.threads = 2;
  const RegistrationResult r1 = register_iconic(fixed, moving, reg);
  const RegistrationResult r2 = register_iconic(fixed, rescaled, reg);
  double gap = 0.0;
  std::mt19937 rng2(17);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = fixed.world_center() + test::random_unit(rng2) * 25.0;
    gap = std::max(gap, (apply_point(r1.transform, p) - apply_point(r2.transform, p)).norm());
  }
  const bool argmin_ok = r1.succeeded && r2.succeeded && gap < 0.25;

  h.report(7, "similarity properties", ssd_ok && ncc_ok && nmi_ok && argmin_ok,
           fmt("ssd(A,A)=%s, |ncc(A,aA+b)-1|=%.1e (<1e-6), nmi(noise)=%.3f "
               "(within 0.05 of 1), argmin shift under rescale %.3f mm (<0.25)",
               ssd_ok ? "0" : "nonzero", std::abs(ncc_affine - 1.0), nmi_noise,
               gap));
}

void run_determinism(Harness& h) {
  PhantomSessionConfig cfg;
  cfg.base.dims = {64, 64, 64};
  cfg.base.spacing = {1.0, 1.0, 1.0};
  cfg.base.seed = 2024;
  cfg.base.set_gland_volume_cc(30.0);
  cfg.n_biopsies = 4;
  cfg.max_rotation_deg = 6.0;
  cfg.max_translation_mm = 5.0;
  cfg.seed = 2024;

  const fs::path dir =
      fs::temp_directory_path() / ("bxfuse_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const PhantomSession session = build_phantom_session(cfg, 2);
  const std::string config_path = write_phantom_session(session, cfg, dir.string());

  SessionConfig sc = SessionConfig::from_json_file(config_path);
  sc.jobs = 1;
  const std::string csv1 = report_to_csv(run_session(sc).report);
  const std::string csv2 = report_to_csv(run_session(sc).report);
  sc.jobs = 2;
  const std::string csv3 = report_to_csv(run_session(sc).report);
  fs::remove_all(dir);

  const bool ok = csv1 == csv2 && csv2 == csv3 && !csv1.empty();
  h.report(8, "end-to-end determinism", ok,
           ok ? "report CSV byte-identical across reruns and --jobs 1/2"
              : "report CSV differs between runs or jobs settings");
}

}  // namespace

int main() {
  Harness h;
  const double t0 = now_seconds();
  run_suite(h);          // criteria 1, 2
  run_speed(h);          // criterion 3
  run_duplicated_needle(h);  // criterion 4
  run_table2(h);         // criterion 5
  run_geometry_oracles(h);   // criterion 6
  run_similarity_properties(h);  // criterion 7
  run_determinism(h);    // criterion 8
  std::printf("acceptance total: %.1f s, %d criterion(s) failed\n",
              now_seconds() - t0, h.failures);
  return h.failures;
}

#include "bxfuse/registration.hpp"

#include <cmath>
#include <doctest.h>
#include <random>

#include "bxfuse/errors.hpp"
#include "bxfuse/phantom.hpp"
#include "bxfuse/validation.hpp"
#include "support/test_util.hpp"

using namespace bxfuse;

namespace {

double action_gap(const RigidTransform& a, const RigidTransform& b,
                  std::mt19937& rng, double extent = 40.0, int n = 40) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = test::random_point(rng, extent);
    worst = std::max(worst, (apply_point(a, p) - apply_point(b, p)).norm());
  }
  return worst;
}

PhantomConfig test_phantom_config(std::uint64_t seed) {
  PhantomConfig cfg;
  cfg.dims = {64, 64, 64};
  cfg.spacing = {1.0, 1.0, 1.0};
  cfg.seed = seed;
  cfg.set_gland_volume_cc(30.0);
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Paired homologous points.
// ---------------------------------------------------------------------------

TEST_CASE("paired-point fit recovers exact transforms") {
  std::mt19937 rng(401);
  for (int trial = 0; trial < 40; ++trial) {
    const RigidTransform truth = test::random_transform(rng);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    const int n = 3 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const Vec3 f = test::random_point(rng);
      pairs.emplace_back(f, apply_point(truth, f));
    }
    // Collinearity is possible but measure-zero with random points.
    const RigidTransform fit = register_paired_points(pairs);
    CHECK(action_gap(fit, truth, rng) < 1e-9);
  }
}

TEST_CASE("paired-point fit: identical lists give the identity") {
  std::mt19937 rng(409);
  std::vector<std::pair<Vec3, Vec3>> pairs;
  for (int i = 0; i < 5; ++i) {
    const Vec3 p = test::random_point(rng);
    pairs.emplace_back(p, p);
  }
  const RigidTransform fit = register_paired_points(pairs);
  CHECK(action_gap(fit, RigidTransform::identity(), rng) < 1e-9);
}

TEST_CASE("paired-point fit rejects degenerate configurations") {
  std::vector<std::pair<Vec3, Vec3>> two{{{0, 0, 0}, {1, 0, 0}},
                                         {{1, 1, 1}, {2, 1, 1}}};
  CHECK_THROWS_AS(register_paired_points(two), DegenerateConfiguration);

  // Collinear: rotation about the line is unobservable.
  std::vector<std::pair<Vec3, Vec3>> collinear{{{0, 0, 0}, {0, 0, 0}},
                                               {{1, 2, 3}, {1, 2, 3}},
                                               {{2, 4, 6}, {2, 4, 6}}};
  CHECK_THROWS_AS(register_paired_points(collinear), DegenerateConfiguration);

  std::vector<std::pair<Vec3, Vec3>> coincident{{{1, 1, 1}, {1, 1, 1}},
                                                {{1, 1, 1}, {1, 1, 1}},
                                                {{1, 1, 1}, {1, 1, 1}}};
  CHECK_THROWS_AS(register_paired_points(coincident), DegenerateConfiguration);
}

TEST_CASE("closed-form fit is never beaten by an exhaustive rotation search") {
  std::mt19937 rng(419);
  std::normal_distribution<double> noise(0.0, 0.8);

  auto residual = [](const std::vector<std::pair<Vec3, Vec3>>& pairs,
                     const RigidTransform& t) {
    double sum = 0.0;
    for (const auto& [f, m] : pairs) {
      const Vec3 d = m - apply_point(t, f);
      sum += d.dot(d);
    }
    return sum;
  };

  for (int trial = 0; trial < 2; ++trial) {
    const RigidTransform truth = test::random_transform(rng, 60.0, 10.0);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    for (int i = 0; i < 3; ++i) {
      const Vec3 f = test::random_point(rng, 20.0);
      Vec3 m = apply_point(truth, f);
      m = m + Vec3{noise(rng), noise(rng), noise(rng)};
      pairs.emplace_back(f, m);
    }
    const RigidTransform closed = register_paired_points(pairs);
    const double closed_res = residual(pairs, closed);

    // 2-degree grid over intrinsic Z-Y-X angles; translation optimal per
    // rotation (centroid match).
    Vec3 cf{}, cm{};
    for (const auto& [f, m] : pairs) {
      cf += f / 3.0;
      cm += m / 3.0;
    }
    double best = std::numeric_limits<double>::max();
    for (int rz = -180; rz < 180; rz += 2)
      for (int ry = -90; ry <= 90; ry += 2)
        for (int rx = -180; rx < 180; rx += 2) {
          RigidTransform t = from_euler(rx, ry, rz, 0, 0, 0);
          t.translation = cm - t.rotation.rotate(cf);
          best = std::min(best, residual(pairs, t));
        }
    CHECK(closed_res <= best + 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Iterative closest point.
// ---------------------------------------------------------------------------

TEST_CASE("icp: identical clouds converge to the identity at score 0") {
  std::mt19937 rng(421);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 150; ++i) cloud.push_back(test::random_point(rng, 25.0));

  const RegistrationResult r =
      register_point_clouds(cloud, cloud, RigidTransform::identity());
  CHECK(r.converged);
  CHECK(r.succeeded);
  CHECK(r.final_score < 1e-12);
  CHECK(!r.small_cloud_warning);
  CHECK(action_gap(r.transform, RigidTransform::identity(), rng) < 1e-9);
}

TEST_CASE("icp recovers a moderate transform on a structured cloud") {
  std::mt19937 rng(431);
  // Ellipsoid-surface-ish cloud: enough shape to lock all 6 DOF.
  std::vector<Vec3> fixed_cloud;
  for (int i = 0; i < 250; ++i) {
    const Vec3 u = test::random_unit(rng);
    fixed_cloud.push_back({25.0 * u.x, 18.0 * u.y, 21.0 * u.z});
  }
  const RigidTransform truth =
      compose(about_center(Quat::from_rotation_vector({0.08, 0.1, -0.12}), {0, 0, 0}),
              RigidTransform{Quat{}, {3.0, -2.0, 4.0}});
  std::vector<Vec3> moving_cloud;
  for (const Vec3& p : fixed_cloud) moving_cloud.push_back(apply_point(truth, p));

  const RegistrationResult r =
      register_point_clouds(fixed_cloud, moving_cloud, RigidTransform::identity(), 100);
  CHECK(r.converged);
  CHECK(r.final_score < 1e-6);
  CHECK(action_gap(r.transform, truth, rng, 25.0) < 1e-5);
}

TEST_CASE("icp flags small clouds per the adequacy guidance") {
  std::mt19937 rng(433);
  std::vector<Vec3> small;
  for (int i = 0; i < 40; ++i) small.push_back(test::random_point(rng, 20.0));
  const RegistrationResult r =
      register_point_clouds(small, small, RigidTransform::identity());
  CHECK(r.small_cloud_warning);

  CHECK_THROWS_AS(register_point_clouds({}, small, RigidTransform::identity()),
                  EmptyInput);
}

// ---------------------------------------------------------------------------
// Iconic registration.
// ---------------------------------------------------------------------------

TEST_CASE("iconic: self-registration returns the identity for every metric") {
  const auto [vol, truth] = generate(test_phantom_config(71));
  for (const char* metric : {"ncc", "ssd", "nmi"}) {
    RegistrationConfig cfg;
    cfg.metric = SimilarityKind::parse(metric);
    cfg.pyramid_levels = 2;
    const RegistrationResult r = register_iconic(vol, vol, cfg);
    CHECK(r.converged);
    std::mt19937 rng(437);
    CHECK(action_gap(r.transform, RigidTransform::identity(), rng, 30.0) < 0.1);
    if (cfg.metric.type != SimilarityKind::Type::ssd) CHECK(r.succeeded);
  }
}

TEST_CASE("iconic: recovers a known phantom perturbation within tolerance") {
  const auto cfg_phantom = test_phantom_config(73);
  const auto [fixed, truth] = generate(cfg_phantom);
  // 5 degree mixed-axis rotation, 4 mm translation.
  const Vec3 axis = Vec3{1.0, 0.7, -0.5}.normalized();
  const RigidTransform t_true = about_center(
      Quat::from_rotation_vector(axis * (5.0 * kDegToRad)), fixed.world_center(),
      Vec3{2.5, -2.0, 2.2});
  const auto [moving, truth2] = perturb(cfg_phantom, truth, t_true, 991);

  RegistrationConfig cfg;
  const RegistrationResult r = register_iconic(fixed, moving, cfg);
  CHECK(r.converged);
  CHECK(r.succeeded);

  std::vector<FiducialPair> pairs;
  for (std::size_t i = 0; i < truth.calcifications.size(); ++i)
    pairs.push_back({truth.calcifications[i], truth2.calcifications[i], ""});
  const auto err = fiducial_error(pairs, r.transform);
  CHECK(err.mean_mm <= 1.5);

  // Monotone pyramid: no regression across levels.
  for (const LevelTrace& level : r.trace) {
    CHECK(level.final_score >= level.initial_score - 1e-12);
  }
}

TEST_CASE("iconic: structureless noise is rejected via succeeded=false") {
  auto cfg_a = test_phantom_config(79);
  cfg_a.gland_level = cfg_a.background_level;  // no anatomy, pure speckle
  cfg_a.n_calcifications = 0;
  cfg_a.speckle_sigma = 0.3;
  auto cfg_b = cfg_a;
  cfg_b.seed = 83;
  const auto [a, ta] = generate(cfg_a);
  const auto [b, tb] = generate(cfg_b);

  RegistrationConfig cfg;
  cfg.pyramid_levels = 2;
  const RegistrationResult r = register_iconic(a, b, cfg);
  CHECK(!r.succeeded);
}

TEST_CASE("iconic: NCC argmin is invariant under positive affine rescaling") {
  const auto cfg_phantom = test_phantom_config(89);
  const auto [fixed, truth] = generate(cfg_phantom);
  const RigidTransform t_true = about_center(
      Quat::from_rotation_vector({0.03, -0.05, 0.06}), fixed.world_center(),
      Vec3{1.5, 2.0, -1.0});
  const auto [moving, truth2] = perturb(cfg_phantom, truth, t_true, 197);

  Volume3D rescaled = moving;
  for (auto& x : rescaled.data) x = 1.7f * x + 11.0f;

  RegistrationConfig cfg;
  const RegistrationResult r1 = register_iconic(fixed, moving, cfg);
  const RegistrationResult r2 = register_iconic(fixed, rescaled, cfg);
  CHECK(r1.succeeded);
  CHECK(r2.succeeded);
  std::mt19937 rng(443);
  CHECK(action_gap(r1.transform, r2.transform, rng, 30.0) < 0.25);
}

TEST_CASE("iconic: left-lobe initialization crosses the 180 degree basin") {
  const auto cfg_phantom = test_phantom_config(97);
  const auto [fixed, truth] = generate(cfg_phantom);
  const RigidTransform small = about_center(
      Quat::from_rotation_vector({0.02, 0.03, -0.04}), fixed.world_center(),
      Vec3{1.0, -1.5, 2.0});
  const RigidTransform t_true =
      compose(about_center(Quat::from_rotation_vector({0, 0, kPi}),
                           fixed.world_center()),
              small);
  const auto [moving, truth2] = perturb(cfg_phantom, truth, t_true, 313);

  RegistrationConfig cfg;
  cfg.left_lobe_mode = true;
  const RegistrationResult r = register_iconic(fixed, moving, cfg);
  CHECK(r.succeeded);

  std::vector<FiducialPair> pairs;
  for (std::size_t i = 0; i < truth.calcifications.size(); ++i)
    pairs.push_back({truth.calcifications[i], truth2.calcifications[i], ""});
  CHECK(fiducial_error(pairs, r.transform).mean_mm <= 1.5);
}

TEST_CASE("iconic: empty initial overlap raises") {
  Volume3D a({16, 16, 16}, {1, 1, 1}, {0, 0, 0}, 10.0f);
  Volume3D b({16, 16, 16}, {1, 1, 1}, {500, 500, 500}, 10.0f);
  RegistrationConfig cfg;
  cfg.pyramid_levels = 1;
  CHECK_THROWS_AS(register_iconic(a, b, cfg), EmptyOverlap);
}

TEST_CASE("iconic: symmetry consistency on a phantom pair") {
  const auto cfg_phantom = test_phantom_config(101);
  const auto [a, truth] = generate(cfg_phantom);
  const RigidTransform t_true = about_center(
      Quat::from_rotation_vector({-0.04, 0.02, 0.05}), a.world_center(),
      Vec3{-2.0, 1.0, 1.5});
  const auto [b, truth2] = perturb(cfg_phantom, truth, t_true, 555);

  RegistrationConfig cfg;
  const RegistrationResult fwd = register_iconic(a, b, cfg);
  const RegistrationResult bwd = register_iconic(b, a, cfg);
  REQUIRE(fwd.succeeded);
  REQUIRE(bwd.succeeded);
  // Round trip within 2x the single-registration accuracy tolerance,
  // measured over the anatomy (points on the gland).
  std::mt19937 rng(449);
  const RigidTransform round = compose(fwd.transform, bwd.transform);
  double gap = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = a.world_center() + test::random_unit(rng) * 20.0;
    gap = std::max(gap, (apply_point(round, p) - p).norm());
  }
  CHECK(gap < 3.0);
}

TEST_CASE("registration config validation") {
  RegistrationConfig cfg;
  cfg.pyramid_levels = 9;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RegistrationConfig{};
  cfg.tol_rotation_deg = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

#include "bxfuse/session.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bxfuse/errors.hpp"
#include "bxfuse/json_util.hpp"
#include "bxfuse/parallel.hpp"
#include "bxfuse/rng.hpp"
#include "bxfuse/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bxfuse {

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

json registration_config_to_json(const RegistrationConfig& r) {
  json out{{"metric", r.metric.name()},
           {"bins", r.metric.bins},
           {"levels", r.pyramid_levels},
           {"max_iterations", r.max_iterations},
           {"tol_translation_mm", r.tol_translation_mm},
           {"tol_rotation_deg", r.tol_rotation_deg},
           {"min_overlap_fraction", r.min_overlap_fraction}};
  if (!std::isnan(r.success_threshold))
    out["success_threshold"] = r.success_threshold;
  return out;
}

RegistrationConfig registration_config_from_json(const json& j) {
  RegistrationConfig r;
  if (j.contains("metric"))
    r.metric = SimilarityKind::parse(j.at("metric").get<std::string>(),
                                     j.value("bins", 32));
  r.pyramid_levels = j.value("levels", r.pyramid_levels);
  r.max_iterations = j.value("max_iterations", r.max_iterations);
  r.tol_translation_mm = j.value("tol_translation_mm", r.tol_translation_mm);
  r.tol_rotation_deg = j.value("tol_rotation_deg", r.tol_rotation_deg);
  r.min_overlap_fraction = j.value("min_overlap_fraction", r.min_overlap_fraction);
  if (j.contains("success_threshold") && !j.at("success_threshold").is_null())
    r.success_threshold = j.at("success_threshold").get<double>();
  return r;
}

json row_to_json(const char* name, const TargetRowStats& row) {
  return json{{"target", name},
              {"n_toward", row.n_toward},
              {"n_inside", row.n_inside},
              {"pct_inside", row.pct_inside},
              {"mean_len_inside_mm", row.mean_len_inside_mm},
              {"pct_len_inside", row.pct_len_inside}};
}

TargetRowStats row_from_json(const json& j) {
  TargetRowStats row;
  row.n_toward = j.at("n_toward").get<int>();
  row.n_inside = j.at("n_inside").get<int>();
  row.pct_inside = j.at("pct_inside").get<double>();
  row.mean_len_inside_mm = j.at("mean_len_inside_mm").get<double>();
  row.pct_len_inside = j.at("pct_len_inside").get<double>();
  return row;
}

}  // namespace

void SessionConfig::validate() const {
  if (reference_path.empty()) throw ConfigError("session needs a reference volume");
  const Vec3 ext = bbox.extent();
  if (!(ext.x > 0 && ext.y > 0 && ext.z > 0))
    throw ConfigError("session bbox must have positive extent");
  std::set<int> indices;
  for (const BiopsyEntry& b : biopsies) {
    if (!indices.insert(b.index).second)
      throw ConfigError("duplicate biopsy index " + std::to_string(b.index));
    if (b.volume_path == reference_path)
      throw ConfigError("biopsy volume must be distinct from R0: " + b.volume_path);
    b.trajectory.validate();
  }
  registration.validate();
}

SessionConfig SessionConfig::from_json_text(const std::string& text,
                                            const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad session JSON: ") + e.what());
  }
  SessionConfig cfg;
  cfg.reference_path = resolve_path(base_dir, j.at("reference").get<std::string>());
  cfg.bbox = box_from_json(j.at("bbox"));
  cfg.registration = registration_config_from_json(j);
  cfg.jobs = j.value("jobs", 0);
  for (const json& bj : j.value("biopsies", json::array())) {
    BiopsyEntry b;
    b.index = bj.at("index").get<int>();
    b.volume_path = resolve_path(base_dir, bj.at("volume").get<std::string>());
    b.left_lobe = bj.value("left_lobe", false);
    b.trajectory = trajectory_from_json(bj.at("trajectory"), b.volume_path);
    for (const json& fj : bj.value("fiducials", json::array()))
      b.fiducials.push_back(fiducial_from_json(fj));
    cfg.biopsies.push_back(std::move(b));
  }
  cfg.validate();
  return cfg;
}

SessionConfig SessionConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open session config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), fs::path(path).parent_path().string());
}

std::string SessionConfig::to_json_text() const {
  json j = registration_config_to_json(registration);
  j["reference"] = reference_path;
  j["bbox"] = box_to_json(bbox);
  j["jobs"] = jobs;
  j["biopsies"] = json::array();
  for (const BiopsyEntry& b : biopsies) {
    json bj{{"index", b.index},
            {"volume", b.volume_path},
            {"left_lobe", b.left_lobe},
            {"trajectory", trajectory_to_json(b.trajectory)}};
    if (!b.fiducials.empty()) {
      bj["fiducials"] = json::array();
      for (const FiducialPair& f : b.fiducials) bj["fiducials"].push_back(fiducial_to_json(f));
    }
    j["biopsies"].push_back(std::move(bj));
  }
  return j.dump(2) + "\n";
}

SessionOutcome run_session(const SessionConfig& cfg) {
  cfg.validate();
  const Volume3D reference = read_volume(cfg.reference_path);

  const int n = static_cast<int>(cfg.biopsies.size());
  SessionOutcome outcome;
  outcome.biopsies.resize(n);

  // One registration per worker; keep the inner loops single-threaded unless
  // the session is trivially small.
  const int outer_jobs = resolve_jobs(cfg.jobs);
  const int inner_threads = (n <= 1) ? outer_jobs : 1;

  parallel_for(n, outer_jobs, [&](int i) {
    const BiopsyEntry& entry = cfg.biopsies[i];
    BiopsyOutcome& out = outcome.biopsies[i];
    out.index = entry.index;
    out.volume_path = entry.volume_path;
    out.left_lobe = entry.left_lobe;
    try {
      const Volume3D moving = read_volume(entry.volume_path);
      RegistrationConfig reg = cfg.registration;
      reg.left_lobe_mode = entry.left_lobe;
      reg.threads = inner_threads;
      const RegistrationResult result = register_iconic(reference, moving, reg);
      out.registration = result;
      if (result.succeeded) {
        out.trajectory_in_r0 =
            map_trajectory(entry.trajectory, invert(result.transform));
        if (!entry.fiducials.empty())
          out.fiducial = fiducial_error(entry.fiducials, result.transform);
      }
    } catch (const Error& e) {
      out.error = e.what();
    }
  });

  double time_sum = 0.0;
  int time_count = 0;
  double fid_sum = 0.0, fid_max = 0.0;
  std::size_t fid_count = 0;
  std::vector<BiopsyRecord> records;
  records.reserve(n);
  for (const BiopsyOutcome& out : outcome.biopsies) {
    if (!out.error.empty()) {
      ++outcome.n_errors;
    } else if (out.registration) {
      time_sum += out.registration->elapsed_seconds;
      ++time_count;
      if (out.registration->succeeded)
        ++outcome.n_succeeded;
      else
        ++outcome.n_failed;
    }
    BiopsyRecord rec;
    const BiopsyEntry& entry = cfg.biopsies[&out - outcome.biopsies.data()];
    rec.trajectory = entry.trajectory;
    if (out.registration && out.registration->succeeded)
      rec.volume_to_r0 = invert(out.registration->transform);
    records.push_back(std::move(rec));
    if (out.fiducial) {
      for (const double e : out.fiducial->per_pair_mm) {
        fid_sum += e;
        fid_max = std::max(fid_max, e);
      }
      fid_count += out.fiducial->per_pair_mm.size();
    }
  }
  if (time_count > 0) outcome.mean_registration_seconds = time_sum / time_count;
  if (fid_count > 0) {
    outcome.fiducial_mean_mm = fid_sum / static_cast<double>(fid_count);
    outcome.fiducial_max_mm = fid_max;
  }

  outcome.report = evaluate_session(records, TargetGrid(cfg.bbox));
  return outcome;
}

std::string summary_text(const SessionOutcome& o) {
  std::ostringstream out;
  const int n = static_cast<int>(o.biopsies.size());
  out << "biopsies:            " << n << "\n";
  out << "fusions succeeded:   " << o.n_succeeded;
  if (n > 0)
    out << " (" << std::lround(100.0 * o.n_succeeded / n) << "%)";
  out << "\n";
  out << "fusions failed:      " << o.n_failed << "\n";
  out << "file errors:         " << o.n_errors << "\n";
  out << "excluded from report:" << (o.report.excluded > 0 ? " " : " ")
      << o.report.excluded << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean registration:   %.2f s\n",
                o.mean_registration_seconds);
  out << buf;
  if (o.fiducial_mean_mm) {
    std::snprintf(buf, sizeof buf, "fiducial error:      mean %.2f mm, max %.2f mm\n",
                  *o.fiducial_mean_mm, *o.fiducial_max_mm);
    out << buf;
  }
  out << "\n" << report_to_csv(o.report);
  return out.str();
}

std::string outcome_to_json_text(const SessionConfig& cfg, const SessionOutcome& o) {
  json j{{"reference", cfg.reference_path},
         {"bbox", box_to_json(cfg.bbox)},
         {"metric", cfg.registration.metric.name()},
         {"n_succeeded", o.n_succeeded},
         {"n_failed", o.n_failed},
         {"n_errors", o.n_errors},
         {"mean_registration_seconds", o.mean_registration_seconds}};
  if (o.fiducial_mean_mm) {
    j["fiducial_mean_mm"] = *o.fiducial_mean_mm;
    j["fiducial_max_mm"] = *o.fiducial_max_mm;
  }
  j["biopsies"] = json::array();
  for (const BiopsyOutcome& b : o.biopsies) {
    json bj{{"index", b.index}, {"volume", b.volume_path}, {"left_lobe", b.left_lobe}};
    if (!b.error.empty()) bj["error"] = b.error;
    if (b.registration) {
      const RegistrationResult& r = *b.registration;
      bj["succeeded"] = r.succeeded;
      bj["converged"] = r.converged;
      bj["final_score"] = r.final_score;
      bj["iterations"] = r.iterations;
      bj["elapsed_seconds"] = r.elapsed_seconds;
      bj["overlap_fraction"] = r.overlap_fraction;
      bj["transform"] = transform_to_json(r.transform);
    }
    if (b.trajectory_in_r0) bj["trajectory_r0"] = trajectory_to_json(*b.trajectory_in_r0);
    if (b.fiducial) {
      bj["fiducial_mean_mm"] = b.fiducial->mean_mm;
      bj["fiducial_max_mm"] = b.fiducial->max_mm;
    }
    j["biopsies"].push_back(std::move(bj));
  }
  json rows = json::array();
  for (int g = 0; g < 6; ++g)
    rows.push_back(row_to_json(group_name(static_cast<TargetGroup>(g)), o.report.rows[g]));
  j["report"] = json{{"rows", rows},
                     {"total", row_to_json("TOTAL", o.report.total)},
                     {"included", o.report.included},
                     {"excluded", o.report.excluded}};
  return j.dump(2) + "\n";
}

MetricsReport report_from_results_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad results JSON: ") + e.what());
  }
  const json& rj = j.at("report");
  MetricsReport report;
  const json& rows = rj.at("rows");
  if (!rows.is_array() || rows.size() != 6)
    throw ConfigError("results report must carry 6 target rows");
  for (int g = 0; g < 6; ++g) report.rows[g] = row_from_json(rows[g]);
  report.total = row_from_json(rj.at("total"));
  report.included = rj.value("included", 0);
  report.excluded = rj.value("excluded", 0);
  return report;
}

// ---------------------------------------------------------------------------
// Phantom sessions.
// ---------------------------------------------------------------------------

PhantomSession build_phantom_session(const PhantomSessionConfig& cfg, int threads) {
  if (cfg.n_biopsies < 1) throw ConfigError("phantom session needs >= 1 biopsy");

  PhantomConfig base = cfg.base;
  base.needle.reset();
  PhantomSession session;
  auto [reference, ref_truth] = generate(base, threads);
  session.reference = std::move(reference);
  session.reference_truth = ref_truth;
  session.bbox = Box3{ref_truth.bbox[0], ref_truth.bbox[1]};

  const TargetGrid grid(session.bbox);
  const Vec3 center = session.reference.world_center();
  const Quat probe_turn = Quat::from_rotation_vector({0.0, 0.0, kPi});

  // Right lobe first (probe untouched), then the left lobe with the turn,
  // matching the acquisition protocol.
  std::vector<TargetLabel> order;
  for (const Side side : {Side::right, Side::left})
    for (const TargetLevel level : {TargetLevel::base, TargetLevel::mid, TargetLevel::apex})
      for (const TargetColumn col : {TargetColumn::lateral, TargetColumn::parasagittal})
        order.push_back(TargetLabel{side, col, level});

  SplitMix rng(cfg.seed ^ 0x8f1bbcdcbfa53e0bULL);
  for (int i = 0; i < cfg.n_biopsies; ++i) {
    const TargetLabel label = order[i % order.size()];
    const Box3& cell = grid.cell(label);
    const Vec3 cell_center = (cell.min + cell.max) * 0.5;

    // Pose perturbation of this re-acquisition.
    auto random_dir = [&rng]() {
      while (true) {
        const Vec3 v{rng.range(-1, 1), rng.range(-1, 1), rng.range(-1, 1)};
        const double n2 = v.dot(v);
        if (n2 > 1e-4 && n2 <= 1.0) return v / std::sqrt(n2);
      }
    };
    const double angle = rng.range(0.2, 1.0) * cfg.max_rotation_deg;
    const double shift = rng.range(0.2, 1.0) * cfg.max_translation_mm;
    const RigidTransform small = about_center(
        Quat::from_rotation_vector(random_dir() * (angle * kDegToRad)), center,
        random_dir() * shift);
    const bool left = (label.side == Side::left);
    const RigidTransform t_true =
        left ? compose(about_center(probe_turn, center), small) : small;

    // Needle in the R0 frame: enters from the apex side, roughly along +z,
    // aimed so the distal core crosses the planned cell.
    const Vec3 jitter{rng.range(-2.5, 2.5), rng.range(-2.5, 2.5), rng.range(-2.0, 2.0)};
    const Vec3 dir =
        Vec3{rng.range(-0.25, 0.25), rng.range(-0.25, 0.25), 1.0}.normalized();
    NeedleTrajectory traj_r0;
    traj_r0.tip = cell_center + jitter + dir * rng.range(0.0, 4.0);
    traj_r0.entry = traj_r0.tip - dir * (cfg.core_length_mm + 15.0);
    traj_r0.core_length_mm = cfg.core_length_mm;
    traj_r0.planned_target = label;

    PhantomConfig bx_cfg = base;
    bx_cfg.needle = NeedleSpec{traj_r0.entry, traj_r0.tip};
    auto [vol, truth] = perturb(bx_cfg, ref_truth, t_true, cfg.seed + 1000 + i, threads);

    PhantomBiopsy item;
    item.trajectory = map_trajectory(traj_r0, t_true);
    item.trajectory.volume_id = "bx" + std::to_string(i + 1);
    item.left_lobe = left;
    for (std::size_t k = 0; k < ref_truth.calcifications.size(); ++k) {
      item.fiducials.push_back(FiducialPair{ref_truth.calcifications[k],
                                            truth.calcifications[k],
                                            "calc" + std::to_string(k)});
    }
    item.volume = std::move(vol);
    item.truth = std::move(truth);
    session.biopsies.push_back(std::move(item));
  }
  return session;
}

std::string write_phantom_session(const PhantomSession& session,
                                  const PhantomSessionConfig& cfg,
                                  const std::string& dir) {
  fs::create_directories(dir);
  write_volume(session.reference, (fs::path(dir) / "r0.bvol").string());

  SessionConfig sc;
  sc.reference_path = "r0.bvol";
  sc.bbox = session.bbox;

  json truth{{"seed", cfg.seed},
             {"bbox", box_to_json(session.bbox)},
             {"calcifications_r0", json::array()},
             {"biopsies", json::array()}};
  for (const Vec3& c : session.reference_truth.calcifications)
    truth["calcifications_r0"].push_back(vec3_to_json(c));

  for (std::size_t i = 0; i < session.biopsies.size(); ++i) {
    const PhantomBiopsy& b = session.biopsies[i];
    char name[32];
    std::snprintf(name, sizeof name, "bx%02zu.bvol", i + 1);
    write_volume(b.volume, (fs::path(dir) / name).string());

    BiopsyEntry entry;
    entry.index = static_cast<int>(i + 1);
    entry.volume_path = name;
    entry.trajectory = b.trajectory;
    entry.left_lobe = b.left_lobe;
    entry.fiducials = b.fiducials;
    sc.biopsies.push_back(std::move(entry));

    json tj{{"volume", name},
            {"true_transform", transform_to_json(b.truth.fused_transform)},
            {"left_lobe", b.left_lobe},
            {"calcifications", json::array()}};
    for (const Vec3& c : b.truth.calcifications)
      tj["calcifications"].push_back(vec3_to_json(c));
    if (b.truth.needle) {
      tj["needle_entry"] = vec3_to_json((*b.truth.needle)[0]);
      tj["needle_tip"] = vec3_to_json((*b.truth.needle)[1]);
    }
    truth["biopsies"].push_back(std::move(tj));
  }

  const std::string config_path = (fs::path(dir) / "session.json").string();
  std::ofstream(config_path) << sc.to_json_text();
  std::ofstream((fs::path(dir) / "truth.json").string()) << truth.dump(2) << "\n";
  return config_path;
}

}  // namespace bxfuse

// bxfuse command-line tool: phantom synthesis, registration, session
// fusion/scoring, and accuracy validation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bxfuse/errors.hpp"
#include "bxfuse/json_util.hpp"
#include "bxfuse/kernels.hpp"
#include "bxfuse/parallel.hpp"
#include "bxfuse/registration.hpp"
#include "bxfuse/session.hpp"
#include "bxfuse/volume_io.hpp"

using nlohmann::json;

namespace {

bxfuse::Vec3 parse_triple(const std::string& s, const char* what) {
  bxfuse::Vec3 v;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &v.x, &v.y, &v.z) != 3)
    throw bxfuse::ConfigError(std::string("expected ") + what + " as x,y,z: " + s);
  return v;
}

bxfuse::Box3 parse_bbox(const std::string& s) {
  double v[6];
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3],
                  &v[4], &v[5]) != 6)
    throw bxfuse::ConfigError("expected --bbox as x0,x1,y0,y1,z0,z1");
  return bxfuse::Box3{{v[0], v[2], v[4]}, {v[1], v[3], v[5]}};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw bxfuse::Error("cannot write " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bxfuse::Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct PhantomGenerateOpts {
  std::string out;
  std::string truth_path;
  std::string dims = "128,128,128";
  std::string spacing = "0.6,0.6,0.6";
  double volume_cc = 0.0;
  double speckle = 0.2;
  std::string needle;  // "ex,ey,ez:tx,ty,tz"
  std::uint64_t seed = 1;
  int jobs = 0;
};

int run_phantom_generate(const PhantomGenerateOpts& o) {
  bxfuse::PhantomConfig cfg;
  const bxfuse::Vec3 d = parse_triple(o.dims, "--dims");
  cfg.dims = {static_cast<int>(d.x), static_cast<int>(d.y), static_cast<int>(d.z)};
  cfg.spacing = parse_triple(o.spacing, "--spacing");
  cfg.speckle_sigma = o.speckle;
  cfg.seed = o.seed;
  if (o.volume_cc > 0.0) cfg.set_gland_volume_cc(o.volume_cc);
  if (!o.needle.empty()) {
    const auto colon = o.needle.find(':');
    if (colon == std::string::npos)
      throw bxfuse::ConfigError("expected --needle as ex,ey,ez:tx,ty,tz");
    bxfuse::NeedleSpec spec;
    spec.entry = parse_triple(o.needle.substr(0, colon), "needle entry");
    spec.tip = parse_triple(o.needle.substr(colon + 1), "needle tip");
    cfg.needle = spec;
  }

  auto [volume, truth] = bxfuse::generate(cfg, bxfuse::resolve_jobs(o.jobs));
  bxfuse::write_volume(volume, o.out);
  std::cout << "wrote " << o.out << " (" << volume.dims[0] << "x" << volume.dims[1]
            << "x" << volume.dims[2] << ")\n";

  if (!o.truth_path.empty()) {
    json t{{"seed", cfg.seed},
           {"ellipsoid_center", bxfuse::vec3_to_json(truth.ellipsoid_center)},
           {"semi_axes", bxfuse::vec3_to_json(truth.semi_axes)},
           {"bbox", bxfuse::box_to_json({truth.bbox[0], truth.bbox[1]})},
           {"calcifications", json::array()}};
    for (const auto& c : truth.calcifications)
      t["calcifications"].push_back(bxfuse::vec3_to_json(c));
    if (truth.needle) {
      t["needle_entry"] = bxfuse::vec3_to_json((*truth.needle)[0]);
      t["needle_tip"] = bxfuse::vec3_to_json((*truth.needle)[1]);
    }
    write_file(o.truth_path, t.dump(2) + "\n");
    std::cout << "wrote " << o.truth_path << "\n";
  }
  return 0;
}

struct PhantomSessionOpts {
  std::string out_dir;
  int n = 12;
  std::uint64_t seed = 1;
  std::string dims = "128,128,128";
  std::string spacing = "0.6,0.6,0.6";
  double volume_cc = 0.0;
  double max_rot = 8.0;
  double max_trans = 6.0;
  double speckle = 0.2;
  int jobs = 0;
};

int run_phantom_session(const PhantomSessionOpts& o) {
  bxfuse::PhantomSessionConfig cfg;
  cfg.n_biopsies = o.n;
  cfg.seed = o.seed;
  cfg.max_rotation_deg = o.max_rot;
  cfg.max_translation_mm = o.max_trans;
  const bxfuse::Vec3 d = parse_triple(o.dims, "--dims");
  cfg.base.dims = {static_cast<int>(d.x), static_cast<int>(d.y),
                   static_cast<int>(d.z)};
  cfg.base.spacing = parse_triple(o.spacing, "--spacing");
  cfg.base.speckle_sigma = o.speckle;
  cfg.base.seed = o.seed;
  if (o.volume_cc > 0.0) cfg.base.set_gland_volume_cc(o.volume_cc);

  const auto session = bxfuse::build_phantom_session(cfg, bxfuse::resolve_jobs(o.jobs));
  const std::string config = bxfuse::write_phantom_session(session, cfg, o.out_dir);
  std::cout << "wrote " << o.n << " biopsy volumes + R0 under " << o.out_dir << "\n"
            << "session config: " << config << "\n";
  return 0;
}

struct RegisterOpts {
  std::string fixed, moving, out;
  std::string metric = "ncc";
  int bins = 32;
  int levels = 3;
  bool left_lobe = false;
  int jobs = 0;
};

int run_register(const RegisterOpts& o) {
  const bxfuse::Volume3D fixed = bxfuse::read_volume(o.fixed);
  const bxfuse::Volume3D moving = bxfuse::read_volume(o.moving);

  bxfuse::RegistrationConfig cfg;
  cfg.metric = bxfuse::SimilarityKind::parse(o.metric, o.bins);
  cfg.pyramid_levels = o.levels;
  cfg.left_lobe_mode = o.left_lobe;
  cfg.threads = bxfuse::resolve_jobs(o.jobs);

  const bxfuse::RegistrationResult r = bxfuse::register_iconic(fixed, moving, cfg);

  json j{{"fixed", o.fixed},
         {"moving", o.moving},
         {"metric", cfg.metric.name()},
         {"transform", bxfuse::transform_to_json(r.transform)},
         {"final_score", r.final_score},
         {"converged", r.converged},
         {"succeeded", r.succeeded},
         {"iterations", r.iterations},
         {"overlap_fraction", r.overlap_fraction},
         {"elapsed_seconds", r.elapsed_seconds}};
  const std::string text = j.dump(2) + "\n";
  if (!o.out.empty()) {
    write_file(o.out, text);
    std::cout << (r.succeeded ? "succeeded" : "did not succeed") << " (score "
              << r.final_score << ", " << r.elapsed_seconds << " s); wrote " << o.out
              << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

struct SessionRunOpts {
  std::string config;
  std::string out_csv;
  std::string results_json;
  std::string bbox;
  int jobs = -1;
};

int run_session_cmd(const SessionRunOpts& o) {
  bxfuse::SessionConfig cfg = bxfuse::SessionConfig::from_json_file(o.config);
  if (!o.bbox.empty()) cfg.bbox = parse_bbox(o.bbox);
  if (o.jobs >= 0) cfg.jobs = o.jobs;

  const bxfuse::SessionOutcome outcome = bxfuse::run_session(cfg);
  std::cout << bxfuse::summary_text(outcome);
  if (!o.out_csv.empty()) {
    write_file(o.out_csv, bxfuse::report_to_csv(outcome.report));
    std::cout << "wrote " << o.out_csv << "\n";
  }
  if (!o.results_json.empty()) {
    write_file(o.results_json, bxfuse::outcome_to_json_text(cfg, outcome));
    std::cout << "wrote " << o.results_json << "\n";
  }
  return outcome.n_succeeded >= 1 ? 0 : 1;
}

struct ValidateOpts {
  std::string input;
  std::string transform_path;  // optional register result JSON
};

int run_validate(const ValidateOpts& o) {
  const json j = json::parse(read_file(o.input));

  bxfuse::RigidTransform t;
  if (!o.transform_path.empty()) {
    const json rj = json::parse(read_file(o.transform_path));
    t = bxfuse::transform_from_json(rj.at("transform"));
  } else if (j.contains("transform")) {
    t = bxfuse::transform_from_json(j.at("transform"));
  }

  if (j.contains("fiducials")) {
    std::vector<bxfuse::FiducialPair> pairs;
    for (const json& fj : j.at("fiducials"))
      pairs.push_back(bxfuse::fiducial_from_json(fj));
    const auto stats = bxfuse::fiducial_error(pairs, t);
    std::printf("fiducial error: mean %.3f mm, max %.3f mm (n=%zu)\n", stats.mean_mm,
                stats.max_mm, stats.per_pair_mm.size());
  }
  if (j.contains("trajectory_pairs")) {
    double sum = 0.0, mx = 0.0;
    int n = 0;
    for (const json& pj : j.at("trajectory_pairs")) {
      const auto a = bxfuse::trajectory_from_json(pj.at("a"));
      const auto b = bxfuse::trajectory_from_json(pj.at("b"));
      const double ang = bxfuse::trajectory_angle(a, b);
      sum += ang;
      mx = std::max(mx, ang);
      ++n;
    }
    if (n > 0)
      std::printf("trajectory angle: mean %.3f deg, max %.3f deg (n=%d)\n", sum / n,
                  mx, n);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bxfuse: 3D ultrasound fusion and biopsy distribution control"};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "synthetic phantom generation");
  phantom->require_subcommand(1);

  PhantomGenerateOpts pg;
  auto* pgen = phantom->add_subcommand("generate", "render one phantom volume");
  pgen->add_option("--out", pg.out, "output BVOL1 path")->required();
  pgen->add_option("--truth", pg.truth_path, "ground-truth JSON path");
  pgen->add_option("--dims", pg.dims, "voxels per axis (X,Y,Z)");
  pgen->add_option("--spacing", pg.spacing, "mm per voxel (sx,sy,sz)");
  pgen->add_option("--volume-cc", pg.volume_cc, "gland volume in cc (20-115)");
  pgen->add_option("--speckle", pg.speckle, "speckle sigma");
  pgen->add_option("--needle", pg.needle, "needle as ex,ey,ez:tx,ty,tz (mm)");
  pgen->add_option("--seed", pg.seed, "random seed");
  pgen->add_option("--jobs", pg.jobs, "worker threads (0 = cores)");

  PhantomSessionOpts ps;
  auto* psess = phantom->add_subcommand(
      "session", "emit R0 + N perturbed biopsy volumes with ground truth");
  psess->add_option("--out", ps.out_dir, "output directory")->required();
  psess->add_option("--n", ps.n, "number of biopsy volumes");
  psess->add_option("--seed", ps.seed, "random seed");
  psess->add_option("--dims", ps.dims, "voxels per axis (X,Y,Z)");
  psess->add_option("--spacing", ps.spacing, "mm per voxel (sx,sy,sz)");
  psess->add_option("--volume-cc", ps.volume_cc, "gland volume in cc");
  psess->add_option("--max-rotation", ps.max_rot, "max perturbation rotation (deg)");
  psess->add_option("--max-translation", ps.max_trans, "max perturbation shift (mm)");
  psess->add_option("--speckle", ps.speckle, "speckle sigma");
  psess->add_option("--jobs", ps.jobs, "worker threads (0 = cores)");

  // register
  RegisterOpts ro;
  auto* reg = app.add_subcommand("register", "rigid iconic registration of two volumes");
  reg->add_option("--fixed", ro.fixed, "fixed/R0 volume")->required();
  reg->add_option("--moving", ro.moving, "moving volume")->required();
  reg->add_option("--metric", ro.metric, "ssd|ncc|nmi");
  reg->add_option("--bins", ro.bins, "NMI histogram bins");
  reg->add_option("--levels", ro.levels, "pyramid levels");
  reg->add_flag("--left-lobe", ro.left_lobe, "seed with the 180 deg probe turn");
  reg->add_option("--jobs", ro.jobs, "worker threads (0 = cores)");
  reg->add_option("--out", ro.out, "result JSON path");

  // session run
  SessionRunOpts so;
  auto* sess = app.add_subcommand("session", "fusion session orchestration");
  sess->require_subcommand(1);
  auto* srun = sess->add_subcommand("run", "register all biopsies to R0 and score");
  srun->add_option("config", so.config, "session config JSON")->required();
  srun->add_option("--out", so.out_csv, "report CSV path");
  srun->add_option("--results", so.results_json, "full results JSON path");
  srun->add_option("--bbox", so.bbox, "override bbox: x0,x1,y0,y1,z0,z1 (mm)");
  srun->add_option("--jobs", so.jobs, "worker pool size (0 = cores)");

  // validate
  ValidateOpts vo;
  auto* val = app.add_subcommand("validate", "fiducial and trajectory-angle accuracy");
  val->add_option("--input", vo.input, "pairs JSON")->required();
  val->add_option("--transform", vo.transform_path, "register result JSON");

  // report
  std::string report_in, report_out;
  auto* rep = app.add_subcommand("report", "re-emit CSV + summary from results JSON");
  rep->add_option("results", report_in, "results JSON from session run")->required();
  rep->add_option("--out", report_out, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pgen->parsed()) return run_phantom_generate(pg);
    if (psess->parsed()) return run_phantom_session(ps);
    if (reg->parsed()) return run_register(ro);
    if (srun->parsed()) return run_session_cmd(so);
    if (val->parsed()) return run_validate(vo);
    if (rep->parsed()) {
      const auto report = bxfuse::report_from_results_json(read_file(report_in));
      const std::string csv = bxfuse::report_to_csv(report);
      if (!report_out.empty()) {
        write_file(report_out, csv);
        std::cout << "wrote " << report_out << "\n";
      } else {
        std::cout << csv;
      }
      return 0;
    }
  } catch (const bxfuse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

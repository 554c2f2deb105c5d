// warptrack: model-based tracking of articulated deformable objects from
// organized depth sequences, plus the synthetic-data and evaluation tooling
// around it.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "warptrack/metrics.hpp"
#include "warptrack/parallel.hpp"
#include "warptrack/seqio.hpp"
#include "warptrack/synth.hpp"
#include "warptrack/tracker.hpp"

namespace fs = std::filesystem;
using namespace warptrack;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct TrackCli {
  std::string model;
  std::string sequence;
  std::string output;
  std::string mode = "dynamic";
  std::string ground_truth;
  std::string init_pose;
  int dump_mesh_every = 0;
  TrackConfig cfg;
};

struct SynthCli {
  std::string model;
  std::string rig;
  std::string config;
  std::string output;
  std::string emit_model;
  Intrinsics intr;  // defaults match a Kinect-One-like sensor
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

struct EvalCli {
  std::string model;
  std::string sequence;
  std::string ground_truth;
  std::string estimate;
  std::string output;
  std::string modes = "dynamic,shape-match,smooth-bind,rigid";
  bool compare_modes = false;
  double joint_max = 0.25;
  int joint_steps = 50;
  double recon_max = 0.02;
  int recon_steps = 40;
  TrackConfig cfg;
};

void add_solver_options(CLI::App* app, TrackConfig& cfg) {
  app->add_option("--iterations", cfg.kin.iterations, "Pose solver iterations per frame")
      ->capture_default_str();
  app->add_option("--lambda-k", cfg.kin.lambda_k, "Damped least squares factor")
      ->capture_default_str();
  app->add_option("--lambda-s", cfg.kin.lambda_s, "Default-pose prior weight")
      ->capture_default_str();
  app->add_option("--diag-floor", cfg.kin.diag_floor, "Absolute diagonal floor")
      ->capture_default_str();
  app->add_option("--assoc-refresh", cfg.kin.assoc_refresh,
                  "Re-associate every N pose iterations")
      ->capture_default_str();
  app->add_option("--shape-iterations", cfg.shape.iterations, "Shape solver iterations per frame")
      ->capture_default_str();
  app->add_option("--lambda-phi", cfg.shape.lambda_phi, "Warp magnitude penalty")
      ->capture_default_str();
  app->add_option("--lambda-nbr", cfg.shape.lambda_nbr, "Warp smoothness penalty")
      ->capture_default_str();
  app->add_option("--lambda-w", cfg.shape.lambda_w, "Per-vertex damping")
      ->capture_default_str();
  app->add_option("--window", cfg.assoc.window_radius, "Association window radius, pixels")
      ->capture_default_str();
  app->add_option("--cutoff", cfg.assoc.cutoff, "Association cutoff distance, meters")
      ->capture_default_str();
  app->add_option("--threads", cfg.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();
}

Pose resolve_init_pose(const ModelBundle& bundle, const std::string& init_pose,
                       const std::string& ground_truth) {
  if (!init_pose.empty()) {
    std::ifstream in(init_pose);
    if (!in) throw IoError("cannot open init pose file " + init_pose);
    Pose pose = bundle.skeleton.zero_pose();
    for (int k = 0; k < pose.size(); ++k)
      if (!(in >> pose[k]))
        throw ParseError("init pose file " + init_pose + ": expected " +
                         std::to_string(pose.size()) + " values");
    return pose;
  }
  if (!ground_truth.empty()) {
    const GroundTruth gt = load_ground_truth(ground_truth);
    if (gt.theta.empty())
      throw ParseError("ground truth " + ground_truth + " has no frames for initialization");
    if (gt.theta.front().size() != bundle.skeleton.joint_count())
      throw ValidationError("ground truth theta count differs from the model");
    return gt.theta.front();
  }
  return bundle.skeleton.zero_pose();
}

void write_kin_diagnostics(const fs::path& path, const std::vector<FrameStats>& stats) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,iteration,residual_sum,step_norm,associated_vertices,solver_skipped\n";
  for (const FrameStats& fsr : stats)
    for (const KinIterStats& s : fsr.kin)
      out << fsr.frame << ',' << s.iteration << ',' << format_double(s.residual_sum) << ','
          << format_double(s.step_norm) << ',' << s.associated << ','
          << (s.solver_skipped ? 1 : 0) << "\n";
}

void write_shape_diagnostics(const fs::path& path, const std::vector<FrameStats>& stats) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,iteration,mean_phi,max_phi,mean_abs_r_before,mean_abs_r_after,singular_count\n";
  for (const FrameStats& fsr : stats)
    for (const ShapeIterStats& s : fsr.shape)
      out << fsr.frame << ',' << s.iteration << ',' << format_double(s.mean_phi) << ','
          << format_double(s.max_phi) << ',' << format_double(s.mean_abs_r_before) << ','
          << format_double(s.mean_abs_r_after) << ',' << s.singular << "\n";
}

void write_phi(const fs::path& path, const std::vector<Vec3>& phi) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "vertex,phi_x,phi_y,phi_z\n";
  for (std::size_t i = 0; i < phi.size(); ++i)
    out << i << ',' << format_double(phi[i].x()) << ',' << format_double(phi[i].y()) << ','
        << format_double(phi[i].z()) << "\n";
}

int cmd_track(const TrackCli& cli) {
  const ModelBundle bundle = load_model(cli.model);
  const TrackMode mode = parse_track_mode(cli.mode);
  const ModelBundle tracked = mode == TrackMode::rigid ? rigidify(bundle) : bundle;

  TrackConfig cfg = cli.cfg;
  cfg.mode = mode;

  SequenceReader reader(cli.sequence);
  const Pose init = resolve_init_pose(bundle, cli.init_pose, cli.ground_truth);

  const fs::path outdir(cli.output);
  fs::create_directories(outdir);

  FrameCallback callback;
  if (cli.dump_mesh_every > 0) {
    callback = [&](const TrackerState& state, int frame, const CloudFrame&) {
      if (frame % cli.dump_mesh_every != 0) return;
      const PosedMesh posed =
          skin(state.mesh, link_offsets(*state.skeleton, state.theta), cfg.threads);
      char name[32];
      std::snprintf(name, sizeof(name), "mesh_%06d.obj", frame);
      save_posed_mesh(outdir / name, posed, state.mesh.triangles);
    };
  }

  const TrackOutputs out = run_tracking(tracked, reader, cfg, init, callback);

  save_ground_truth(outdir / "track_poses.csv", out.estimate);
  write_kin_diagnostics(outdir / "kin_diagnostics.csv", out.stats);
  const bool has_shape = mode == TrackMode::dynamic || mode == TrackMode::shape_match;
  if (has_shape) {
    write_shape_diagnostics(outdir / "shape_diagnostics.csv", out.stats);
    write_phi(outdir / "phi_final.csv", out.final_phi);
  }
  std::cout << "tracked " << reader.frame_count() << " frames in mode " << to_string(mode)
            << " -> " << (outdir / "track_poses.csv").string() << "\n";
  return 0;
}

int cmd_synth(const SynthCli& cli) {
  ModelBundle bundle;
  if (!cli.rig.empty())
    bundle = make_rig(cli.rig);
  else if (!cli.model.empty())
    bundle = load_model(cli.model);
  else
    throw ValidationError("synth requires --model or --rig");

  if (!cli.emit_model.empty()) {
    const fs::path out(cli.emit_model);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_model(out, bundle);
    std::cout << "model -> " << cli.emit_model << "\n";
    if (cli.output.empty()) return 0;
  }
  if (cli.output.empty()) throw ValidationError("synth requires --output");

  SynthConfig cfg;
  if (!cli.config.empty()) cfg = load_synth_config(cli.config, bundle.skeleton);
  if (cli.seed_set) cfg.noise.seed = cli.seed;

  const fs::path prefix(cli.output);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  const fs::path seq = prefix.string() + ".wts";
  const fs::path gt = prefix.string() + "_gt.csv";
  generate_sequence(bundle, cfg.trajectory, cfg.phi, cli.intr, cfg.noise, seq, gt, cli.threads);
  std::cout << "sequence -> " << seq.string() << "\nground truth -> " << gt.string() << "\n";
  return 0;
}

double curve_value_at(const AccuracyCurve& curve, double threshold) {
  for (std::size_t i = 1; i < curve.thresholds.size(); ++i)
    if (curve.thresholds[i] >= threshold) {
      const double t = (threshold - curve.thresholds[i - 1]) /
                       (curve.thresholds[i] - curve.thresholds[i - 1]);
      return curve.fraction[i - 1] * (1 - t) + curve.fraction[i] * t;
    }
  return curve.fraction.back();
}

void write_curves(std::ofstream& out, const std::string& mode, const std::string& metric,
                  const AccuracyCurve& curve) {
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
    out << mode << ',' << metric << ',' << format_double(curve.thresholds[i]) << ','
        << format_double(curve.fraction[i]) << "\n";
}

int cmd_eval(const EvalCli& cli) {
  const GroundTruth truth = load_ground_truth(cli.ground_truth);
  const fs::path outdir(cli.output);
  fs::create_directories(outdir);

  const std::vector<double> joint_thresholds = default_thresholds(cli.joint_max, cli.joint_steps);
  const std::vector<double> recon_thresholds = default_thresholds(cli.recon_max, cli.recon_steps);

  std::ofstream curves(outdir / "curves.csv");
  std::ofstream summary(outdir / "summary.csv");
  if (!curves || !summary) throw IoError("cannot write evaluation outputs to " + cli.output);
  curves << "mode,metric,threshold,fraction\n";
  summary << "mode,joint_auc,joint_mean,accuracy_at_10cm,recon_auc,recon_median,recon_mean\n";

  if (cli.compare_modes) {
    if (cli.model.empty() || cli.sequence.empty())
      throw ValidationError("--compare-modes requires --model and --sequence");
    const ModelBundle bundle = load_model(cli.model);
    std::vector<TrackMode> modes;
    std::stringstream ss(cli.modes);
    std::string tok;
    while (std::getline(ss, tok, ',')) modes.push_back(parse_track_mode(tok));

    const std::vector<ModeReport> reports = compare_modes(
        bundle, cli.sequence, truth, modes, cli.cfg, joint_thresholds, recon_thresholds);
    for (const ModeReport& r : reports) {
      write_curves(curves, to_string(r.mode), "joint", r.joint_curve);
      write_curves(curves, to_string(r.mode), "recon", r.recon_curve);
      summary << to_string(r.mode) << ',' << format_double(r.joint_curve.auc) << ','
              << format_double(r.joint_mean) << ','
              << format_double(curve_value_at(r.joint_curve, 0.10)) << ','
              << format_double(r.recon_curve.auc) << ',' << format_double(r.recon_median) << ','
              << format_double(r.recon_mean) << "\n";
      std::cout << to_string(r.mode) << ": joint auc " << r.joint_curve.auc << ", recon auc "
                << r.recon_curve.auc << ", recon median " << r.recon_median << "\n";
    }
    return 0;
  }

  if (cli.estimate.empty())
    throw ValidationError("eval requires --estimate or --compare-modes");
  const GroundTruth estimate = load_ground_truth(cli.estimate);
  const AccuracyCurve curve = joint_accuracy(estimate, truth, joint_thresholds);
  const std::vector<double> dist = joint_distances(estimate, truth);
  const double mean =
      dist.empty() ? 0.0 : std::accumulate(dist.begin(), dist.end(), 0.0) / dist.size();
  write_curves(curves, "estimate", "joint", curve);
  summary << "estimate," << format_double(curve.auc) << ',' << format_double(mean) << ','
          << format_double(curve_value_at(curve, 0.10)) << ",,,\n";
  std::cout << "joint auc " << curve.auc << ", mean error " << mean << ", accuracy@10cm "
            << curve_value_at(curve, 0.10) << "\n";
  return 0;
}

int cmd_subdivide(const std::string& model, int iterations, const std::string& output) {
  ModelBundle bundle = load_model(model);
  bundle.mesh = subdivide(bundle.mesh, iterations);
  bundle.mesh.neighbors = build_neighbors(bundle.mesh.v0, 4);
  const fs::path out(output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_model(out, bundle);
  std::cout << "subdivided " << iterations << "x -> " << output << " ("
            << bundle.mesh.v0.size() << " vertices, " << bundle.mesh.polys.size()
            << " polys, " << bundle.mesh.triangles.size() << " triangles)\n";
  return 0;
}

int cmd_validate(const std::string& model) {
  const std::vector<ValidationIssue> issues = validate_model_file(model);
  if (issues.empty()) {
    std::cout << model << ": ok\n";
    return 0;
  }
  for (const ValidationIssue& i : issues)
    std::cout << model << ": " << i.entity << ": " << i.message << "\n";
  std::cout << issues.size() << " issue(s) found\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"articulated deformable tracking on organized depth sequences"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "Read options from a TOML/INI file");

  TrackCli track;
  CLI::App* t = app.add_subcommand("track", "Track a sequence with a model");
  t->add_option("--model", track.model, "Model bundle (JSON)")->required();
  t->add_option("--sequence", track.sequence, "Depth sequence (.wts)")->required();
  t->add_option("--output", track.output, "Output directory")->required();
  t->add_option("--mode", track.mode, "dynamic|shape-match|smooth-bind|rigid")
      ->capture_default_str();
  t->add_option("--ground-truth", track.ground_truth,
                "Ground truth CSV; frame 0 initializes the pose");
  t->add_option("--init-pose", track.init_pose, "Explicit initial pose file (overrides)");
  t->add_option("--dump-mesh-every", track.dump_mesh_every,
                "Write a posed OBJ every N frames (0 = off)")
      ->capture_default_str();
  add_solver_options(t, track.cfg);

  SynthCli synth;
  CLI::App* s = app.add_subcommand("synth", "Render a synthetic sequence with ground truth");
  s->add_option("--model", synth.model, "Model bundle (JSON)");
  s->add_option("--rig", synth.rig, "Built-in rig: sphere|arm|biped");
  s->add_option("--config", synth.config, "Trajectory/noise/phi config (JSON)");
  s->add_option("--output", synth.output, "Output prefix (.wts and _gt.csv are appended)");
  s->add_option("--emit-model", synth.emit_model, "Also write the model bundle here");
  s->add_option("--width", synth.intr.width, "Image width")->capture_default_str();
  s->add_option("--height", synth.intr.height, "Image height")->capture_default_str();
  s->add_option("--fx", synth.intr.fx, "Focal length x")->capture_default_str();
  s->add_option("--fy", synth.intr.fy, "Focal length y")->capture_default_str();
  s->add_option("--cx", synth.intr.cx, "Principal point x")->capture_default_str();
  s->add_option("--cy", synth.intr.cy, "Principal point y")->capture_default_str();
  s->add_option("--seed", synth.seed, "Noise seed override")->each([&synth](const std::string&) {
    synth.seed_set = true;
  });
  s->add_option("--threads", synth.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();

  EvalCli eval;
  CLI::App* e = app.add_subcommand("eval", "Evaluate tracking quality");
  e->add_option("--model", eval.model, "Model bundle (JSON, for --compare-modes)");
  e->add_option("--sequence", eval.sequence, "Depth sequence (for --compare-modes)");
  e->add_option("--ground-truth", eval.ground_truth, "Ground truth CSV")->required();
  e->add_option("--estimate", eval.estimate, "Estimated trajectory CSV (from track)");
  e->add_option("--output", eval.output, "Output directory")->required();
  e->add_flag("--compare-modes", eval.compare_modes,
              "Track the sequence once per mode and compare");
  e->add_option("--modes", eval.modes, "Comma list of modes for --compare-modes")
      ->capture_default_str();
  e->add_option("--joint-max-threshold", eval.joint_max, "Joint curve range, meters")
      ->capture_default_str();
  e->add_option("--joint-steps", eval.joint_steps, "Joint curve samples")->capture_default_str();
  e->add_option("--recon-max-threshold", eval.recon_max, "Recon curve range, meters")
      ->capture_default_str();
  e->add_option("--recon-steps", eval.recon_steps, "Recon curve samples")->capture_default_str();
  add_solver_options(e, eval.cfg);

  std::string subdiv_model, subdiv_output;
  int subdiv_iterations = 2;
  CLI::App* d = app.add_subcommand("subdivide", "Catmull-Clark subdivide a model bundle");
  d->add_option("--model", subdiv_model, "Model bundle (JSON)")->required();
  d->add_option("--iterations", subdiv_iterations, "Subdivision iterations")
      ->capture_default_str();
  d->add_option("--output", subdiv_output, "Output model path")->required();

  std::string validate_model;
  CLI::App* v = app.add_subcommand("validate", "Check every invariant of a model bundle");
  v->add_option("--model", validate_model, "Model bundle (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_track(track);
    if (s->parsed()) return cmd_synth(synth);
    if (e->parsed()) return cmd_eval(eval);
    if (d->parsed()) return cmd_subdivide(subdiv_model, subdiv_iterations, subdiv_output);
    if (v->parsed()) return cmd_validate(validate_model);
  } catch (const IoError& err) {
    std::cerr << "io error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& err) {
    std::cerr << "parse error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const VersionError& err) {
    std::cerr << "version error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const HeaderMismatch& err) {
    std::cerr << "format error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const TruncatedFile& err) {
    std::cerr << "truncated file: " << err.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& err) {
    std::cerr << "validation error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

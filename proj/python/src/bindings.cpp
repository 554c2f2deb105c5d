#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "warptrack/metrics.hpp"
#include "warptrack/seqio.hpp"
#include "warptrack/synth.hpp"
#include "warptrack/tracker.hpp"

namespace py = pybind11;
using namespace warptrack;

namespace {

Pose pose_from_array(const ModelBundle& bundle, const Eigen::VectorXd& theta) {
  if (theta.size() != bundle.skeleton.joint_count())
    throw LengthMismatch("theta has " + std::to_string(theta.size()) + " values, model expects " +
                         std::to_string(bundle.skeleton.joint_count()));
  return theta;
}

std::vector<Vec3> phi_from_array(const ModelBundle& bundle, const py::object& phi) {
  if (phi.is_none()) return {};
  const Eigen::MatrixXd m = phi.cast<Eigen::MatrixXd>();
  if (m.rows() != static_cast<Eigen::Index>(bundle.mesh.v0.size()) || m.cols() != 3)
    throw LengthMismatch("phi must be (vertex_count, 3)");
  std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i);
  return out;
}

Eigen::MatrixXd vec3s_to_matrix(const std::vector<Vec3>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

TrackConfig config_from_kwargs(const std::string& mode, int iterations, double lambda_k,
                               double lambda_s, int shape_iterations, double lambda_phi,
                               double lambda_nbr, double lambda_w, int window, double cutoff,
                               int threads) {
  TrackConfig cfg;
  cfg.mode = parse_track_mode(mode);
  cfg.kin.iterations = iterations;
  cfg.kin.lambda_k = lambda_k;
  cfg.kin.lambda_s = lambda_s;
  cfg.shape.iterations = shape_iterations;
  cfg.shape.lambda_phi = lambda_phi;
  cfg.shape.lambda_nbr = lambda_nbr;
  cfg.shape.lambda_w = lambda_w;
  cfg.assoc.window_radius = window;
  cfg.assoc.cutoff = cutoff;
  cfg.threads = threads;
  return cfg;
}

Intrinsics intrinsics_from_args(int width, int height, double fx, double fy, double cx,
                                double cy) {
  Intrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fx = fx;
  intr.fy = fy;
  intr.cx = cx < 0 ? width / 2.0 : cx;
  intr.cy = cy < 0 ? height / 2.0 : cy;
  return intr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Articulated deformable tracking on organized depth sequences";

  py::register_exception<Error>(m, "WarptrackError");

  // --- dual quaternion algebra -------------------------------------------
  py::class_<Quat>(m, "Quat")
      .def(py::init<double, double, double, double>(), py::arg("w"), py::arg("x"), py::arg("y"),
           py::arg("z"))
      .def_readwrite("w", &Quat::w)
      .def_readwrite("x", &Quat::x)
      .def_readwrite("y", &Quat::y)
      .def_readwrite("z", &Quat::z);

  py::class_<DualQuat>(m, "DualQuat")
      .def(py::init<>())
      .def_readwrite("real", &DualQuat::real)
      .def_readwrite("dual", &DualQuat::dual)
      .def_static("identity", &DualQuat::identity)
      .def("is_unit", &DualQuat::is_unit, py::arg("tol") = 1e-9)
      .def("to_array", [](const DualQuat& h) { return Vec8(to_vec8(h)); })
      .def("__repr__", [](const DualQuat& h) {
        const Vec8 v = to_vec8(h);
        std::string s = "DualQuat([";
        for (int i = 0; i < 8; ++i) s += (i ? ", " : "") + format_double(v[i]);
        return s + "])";
      });

  m.def("dq_from_array", [](const Vec8& v) { return from_vec8(v); }, py::arg("values"),
        "Dual quaternion from the canonical 8-vector layout");
  m.def("hinge", [](double theta, const Vec3& axis) { return hinge(theta, Axis(axis)); },
        py::arg("theta"), py::arg("axis"), "Rotation by theta about a fixed unit axis");
  m.def("prismatic",
        [](double theta, const Vec3& axis) { return prismatic(theta, Axis(axis)); },
        py::arg("theta"), py::arg("axis"), "Translation by theta along a fixed unit axis");
  m.def("compose", &compose, py::arg("a"), py::arg("b"), "Apply b, then a");
  m.def("transform_point", &transform_point, py::arg("h"), py::arg("p"));
  m.def("normalize", &normalize, py::arg("h"));
  m.def("inverse", &inverse, py::arg("h"));
  m.def("to_matrix", &to_matrix, py::arg("h"));
  m.def("from_matrix", &from_matrix, py::arg("matrix"));
  m.def("d_hinge", [](double theta, const Vec3& axis) { return Vec8(d_hinge(theta, Axis(axis))); },
        py::arg("theta"), py::arg("axis"));
  m.def("d_prismatic",
        [](double theta, const Vec3& axis) { return Vec8(d_prismatic(theta, Axis(axis))); },
        py::arg("theta"), py::arg("axis"));

  // --- model bundles -------------------------------------------------------
  py::class_<ModelBundle>(m, "ModelBundle")
      .def_property_readonly("name", [](const ModelBundle& b) { return b.meta.name; })
      .def_property_readonly("link_names",
                             [](const ModelBundle& b) {
                               std::vector<std::string> names;
                               for (const Link& l : b.skeleton.links()) names.push_back(l.name);
                               return names;
                             })
      .def_property_readonly("joint_count",
                             [](const ModelBundle& b) { return b.skeleton.joint_count(); })
      .def_property_readonly("vertex_count",
                             [](const ModelBundle& b) { return b.mesh.vertex_count(); })
      .def_property_readonly("triangle_count",
                             [](const ModelBundle& b) { return b.mesh.triangles.size(); })
      .def_property_readonly("poly_count", [](const ModelBundle& b) { return b.mesh.polys.size(); })
      .def_property_readonly(
          "template_vertices",
          [](const ModelBundle& b) { return vec3s_to_matrix(b.mesh.v0); })
      .def("__repr__", [](const ModelBundle& b) {
        return "ModelBundle('" + b.meta.name + "', " + std::to_string(b.skeleton.link_count()) +
               " links, " + std::to_string(b.mesh.vertex_count()) + " vertices)";
      });

  m.def("load_model", &load_model, py::arg("path"));
  m.def("save_model", &save_model, py::arg("path"), py::arg("bundle"));
  m.def("make_rig", &make_rig, py::arg("name"), "Built-in test rig: sphere|arm|biped");
  m.def("subdivide_model",
        [](const ModelBundle& bundle, int iterations) {
          ModelBundle out = bundle;
          out.mesh = subdivide(bundle.mesh, iterations);
          out.mesh.neighbors = build_neighbors(out.mesh.v0, 4);
          return out;
        },
        py::arg("bundle"), py::arg("iterations") = 1,
        "Catmull-Clark subdivision with weight interpolation");
  m.def("validate_model_file",
        [](const std::filesystem::path& path) {
          std::vector<std::pair<std::string, std::string>> out;
          for (const ValidationIssue& i : validate_model_file(path))
            out.emplace_back(i.entity, i.message);
          return out;
        },
        py::arg("path"));

  // --- kinematics and skinning --------------------------------------------
  m.def("forward_kinematics",
        [](const ModelBundle& bundle, const Eigen::VectorXd& theta) {
          const auto fk = forward_kinematics(bundle.skeleton, pose_from_array(bundle, theta));
          Eigen::MatrixXd out(static_cast<Eigen::Index>(fk.size()), 8);
          for (std::size_t j = 0; j < fk.size(); ++j)
            out.row(static_cast<Eigen::Index>(j)) = to_vec8(fk[j]);
          return out;
        },
        py::arg("bundle"), py::arg("theta"),
        "World transform of every link as rows in the canonical 8-vector layout");
  m.def("joint_positions",
        [](const ModelBundle& bundle, const Eigen::VectorXd& theta) {
          const auto fk = forward_kinematics(bundle.skeleton, pose_from_array(bundle, theta));
          std::vector<Vec3> origins(fk.size());
          for (std::size_t j = 0; j < fk.size(); ++j)
            origins[j] = transform_point(fk[j], Vec3::Zero());
          return vec3s_to_matrix(origins);
        },
        py::arg("bundle"), py::arg("theta"));
  m.def("skin_mesh",
        [](const ModelBundle& bundle, const Eigen::VectorXd& theta, const py::object& phi) {
          const auto offsets =
              link_offsets(bundle.skeleton, pose_from_array(bundle, theta));
          const std::vector<Vec3> phi_override = phi_from_array(bundle, phi);
          const PosedMesh posed = phi_override.empty()
                                      ? skin(bundle.mesh, offsets)
                                      : skin(bundle.mesh, offsets, phi_override, 1);
          py::dict out;
          out["vertices"] = vec3s_to_matrix(posed.v);
          out["normals"] = vec3s_to_matrix(posed.n);
          out["valid"] = py::array_t<std::uint8_t>(static_cast<py::ssize_t>(posed.valid.size()),
                                                   posed.valid.data());
          return out;
        },
        py::arg("bundle"), py::arg("theta"), py::arg("phi") = py::none(),
        "Dual quaternion skinning of the template at a pose, with vertex normals");

  // --- synthesis -------------------------------------------------------------
  m.def("render_depth",
        [](const ModelBundle& bundle, const Eigen::VectorXd& theta, const py::object& phi,
           int width, int height, double fx, double fy, double cx, double cy, double sigma,
           double dropout, double quantization, std::uint64_t seed, int frame) {
          const Intrinsics intr = intrinsics_from_args(width, height, fx, fy, cx, cy);
          NoiseSpec noise{sigma, dropout, quantization, seed};
          const FrameSynthesis fsynth =
              synthesize_frame(bundle, pose_from_array(bundle, theta),
                               phi_from_array(bundle, phi), intr, noise, frame);
          py::array_t<float> depth({height, width});
          std::copy(fsynth.depth.begin(), fsynth.depth.end(), depth.mutable_data());
          return depth;
        },
        py::arg("bundle"), py::arg("theta"), py::arg("phi") = py::none(),
        py::arg("width") = 512, py::arg("height") = 424, py::arg("fx") = 365.456,
        py::arg("fy") = 365.456, py::arg("cx") = -1.0, py::arg("cy") = -1.0,
        py::arg("sigma") = 0.0, py::arg("dropout") = 0.0, py::arg("quantization") = 0.0,
        py::arg("seed") = 0, py::arg("frame") = 0,
        "Z-buffer render of the posed model as a depth image (0 = no hit)");

  m.def("generate_sequence",
        [](const ModelBundle& bundle, const std::filesystem::path& config,
           const std::filesystem::path& sequence_path,
           const std::filesystem::path& ground_truth_path, int width, int height, double fx,
           double fy, double cx, double cy, int threads) {
          const SynthConfig cfg = load_synth_config(config, bundle.skeleton);
          const Intrinsics intr = intrinsics_from_args(width, height, fx, fy, cx, cy);
          generate_sequence(bundle, cfg.trajectory, cfg.phi, intr, cfg.noise, sequence_path,
                            ground_truth_path, threads);
        },
        py::arg("bundle"), py::arg("config"), py::arg("sequence_path"),
        py::arg("ground_truth_path"), py::arg("width") = 512, py::arg("height") = 424,
        py::arg("fx") = 365.456, py::arg("fy") = 365.456, py::arg("cx") = -1.0,
        py::arg("cy") = -1.0, py::arg("threads") = 0,
        "Render a sequence from a synth config file and write it with ground truth");

  // --- tracking and evaluation ----------------------------------------------
  m.def("track_sequence",
        [](const ModelBundle& bundle, const std::filesystem::path& sequence_path,
           const py::object& init_theta, const std::string& mode, int iterations, double lambda_k,
           double lambda_s, int shape_iterations, double lambda_phi, double lambda_nbr,
           double lambda_w, int window, double cutoff, int threads) {
          const TrackConfig cfg =
              config_from_kwargs(mode, iterations, lambda_k, lambda_s, shape_iterations,
                                 lambda_phi, lambda_nbr, lambda_w, window, cutoff, threads);
          const ModelBundle tracked =
              cfg.mode == TrackMode::rigid ? rigidify(bundle) : bundle;
          SequenceReader reader(sequence_path);
          const Pose init = init_theta.is_none()
                                ? bundle.skeleton.zero_pose()
                                : pose_from_array(bundle, init_theta.cast<Eigen::VectorXd>());
          TrackOutputs out;
          {
            py::gil_scoped_release release;
            out = run_tracking(tracked, reader, cfg, init);
          }

          const int frames = out.estimate.frame_count();
          const int nt = bundle.skeleton.joint_count();
          Eigen::MatrixXd thetas(frames, nt);
          for (int f = 0; f < frames; ++f)
            thetas.row(f) = out.estimate.theta[static_cast<std::size_t>(f)];
          py::array_t<double> joints({frames, bundle.skeleton.link_count(), 3});
          auto jv = joints.mutable_unchecked<3>();
          for (int f = 0; f < frames; ++f)
            for (int j = 0; j < bundle.skeleton.link_count(); ++j)
              for (int c = 0; c < 3; ++c)
                jv(f, j, c) =
                    out.estimate.joints[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)][c];

          py::dict result;
          result["theta"] = thetas;
          result["joints"] = joints;
          result["final_phi"] = vec3s_to_matrix(out.final_phi);
          return result;
        },
        py::arg("bundle"), py::arg("sequence_path"), py::arg("init_theta") = py::none(),
        py::arg("mode") = "dynamic", py::arg("iterations") = KinSolverConfig{}.iterations,
        py::arg("lambda_k") = KinSolverConfig{}.lambda_k,
        py::arg("lambda_s") = KinSolverConfig{}.lambda_s,
        py::arg("shape_iterations") = ShapeSolverConfig{}.iterations,
        py::arg("lambda_phi") = ShapeSolverConfig{}.lambda_phi,
        py::arg("lambda_nbr") = ShapeSolverConfig{}.lambda_nbr,
        py::arg("lambda_w") = ShapeSolverConfig{}.lambda_w,
        py::arg("window") = AssocConfig{}.window_radius,
        py::arg("cutoff") = AssocConfig{}.cutoff, py::arg("threads") = 0,
        "Track a sequence; returns per-frame theta, joint positions and the final warp field");

  m.def("load_ground_truth_arrays",
        [](const std::filesystem::path& path) {
          const GroundTruth gt = load_ground_truth(path);
          const int frames = gt.frame_count();
          const int nj = gt.joint_count();
          const int nt = gt.theta.empty() ? 0 : static_cast<int>(gt.theta[0].size());
          Eigen::MatrixXd thetas(frames, nt);
          py::array_t<double> joints({frames, nj, 3});
          py::array_t<std::uint8_t> vis({frames, nj});
          auto jv = joints.mutable_unchecked<3>();
          auto vv = vis.mutable_unchecked<2>();
          for (int f = 0; f < frames; ++f) {
            thetas.row(f) = gt.theta[static_cast<std::size_t>(f)];
            for (int j = 0; j < nj; ++j) {
              for (int c = 0; c < 3; ++c)
                jv(f, j, c) = gt.joints[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)][c];
              vv(f, j) = gt.visible[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)];
            }
          }
          py::dict out;
          out["joint_names"] = gt.joint_names;
          out["theta"] = thetas;
          out["joints"] = joints;
          out["visible"] = vis;
          return out;
        },
        py::arg("path"));

  m.def("joint_accuracy_curve",
        [](const Eigen::MatrixXd& distances, const Eigen::VectorXd& thresholds) {
          std::vector<double> d(distances.data(), distances.data() + distances.size());
          std::vector<double> t(thresholds.data(), thresholds.data() + thresholds.size());
          const AccuracyCurve curve = accuracy_curve(d, t);
          py::dict out;
          out["thresholds"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
              curve.thresholds.data(), static_cast<Eigen::Index>(curve.thresholds.size())));
          out["fraction"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
              curve.fraction.data(), static_cast<Eigen::Index>(curve.fraction.size())));
          out["auc"] = curve.auc;
          return out;
        },
        py::arg("distances"), py::arg("thresholds"),
        "Fraction-within-threshold curve and its normalized area");

  m.attr("__version__") = "0.1.0";
}

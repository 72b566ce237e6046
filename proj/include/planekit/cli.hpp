#pragma once

// The `planekit` command line: one binary with a subcommand per pipeline
// stage. Exit codes: 0 success, 2 usage or validation error, 1 runtime error.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "planekit/io.hpp"
#include "planekit/planekit.hpp"

namespace planekit::cli {

namespace fs = std::filesystem;
using io::Json;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;  ///< 0 = PLANEKIT_THREADS or 1

  int resolved_threads() const { return threads > 0 ? threads : default_thread_count(); }
};

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands

inline void add_ransac_options(CLI::App* app, RansacConfig& c) {
  app->add_option("--inlier-threshold", c.inlier_threshold, "RANSAC inlier distance (m)")->capture_default_str();
  app->add_option("--coverage", c.coverage_target, "stop once this fraction of points is covered")->capture_default_str();
  app->add_option("--iterations", c.iterations_per_plane, "RANSAC trials per plane")->capture_default_str();
  app->add_option("--min-inliers", c.min_inliers, "smallest plane support")->capture_default_str();
  app->add_option("--refit-rounds", c.refit_rounds, "least-squares refits of each winner")->capture_default_str();
}

inline void add_mrf_options(CLI::App* app, MrfConfig& c, std::string& solver) {
  app->add_option("--truncation", c.unary_truncation, "unary distance truncation (m)")->capture_default_str();
  app->add_option("--nonplanar-cost", c.nonplanar_unary, "unary cost of the non-planar label (m)")->capture_default_str();
  app->add_option("--pairwise-weight", c.pairwise_weight, "Potts weight")->capture_default_str();
  app->add_option("--edge-sigma", c.edge_sigma, "colour edge bandwidth")->capture_default_str();
  app->add_option("--solver", solver, "icm or alpha-expansion")
      ->check(CLI::IsMember({"icm", "alpha-expansion"}))
      ->capture_default_str();
  app->add_option("--sweeps", c.max_sweeps, "ICM sweeps or expansion cycles")->capture_default_str();
}

inline void add_dcrf_options(CLI::App* app, DcrfConfig& c, std::string& mode) {
  app->add_option("--crf-iterations", c.iterations, "mean-field iterations")->capture_default_str();
  app->add_option("--spatial-sigma", c.spatial_sigma)->capture_default_str();
  app->add_option("--bilateral-spatial-sigma", c.bilateral_spatial_sigma)->capture_default_str();
  app->add_option("--bilateral-color-sigma", c.bilateral_color_sigma)->capture_default_str();
  app->add_option("--spatial-weight", c.spatial_weight)->capture_default_str();
  app->add_option("--bilateral-weight", c.bilateral_weight)->capture_default_str();
  app->add_option("--crf-mode", mode, "auto, exact or truncated")
      ->check(CLI::IsMember({"auto", "exact", "truncated"}))
      ->capture_default_str();
}

inline DcrfMode dcrf_mode(const std::string& s) {
  if (s == "exact") return DcrfMode::exact;
  if (s == "truncated") return DcrfMode::truncated;
  return DcrfMode::automatic;
}

inline Json depth_stats_json(const DepthStats& s) {
  return Json{{"rel", s.rel},         {"rel_sqr", s.rel_sqr}, {"log10", s.log10},     {"rmse_lin", s.rmse_lin},
              {"rmse_log", s.rmse_log}, {"delta_1", s.delta_1}, {"delta_2", s.delta_2}, {"delta_3", s.delta_3},
              {"pixels", s.pixels}};
}

/// Input depth of a sample directory: the corrupted sensor depth when present.
inline DepthMap read_input_depth(const io::SampleBundle& b) {
  return io::read_depth_png(fs::exists(b.input_depth()) ? b.input_depth() : b.depth());
}

inline RgbImage read_rgb_or_gray(const io::SampleBundle& b, const CameraIntrinsics& k) {
  if (fs::exists(b.rgb())) return io::read_rgb_png(b.rgb());
  return RgbImage(k.width, k.height, Rgb{128, 128, 128});
}

/// Mask stack of a directory: masks.npy, else one-hot of labels.png.
inline ProbMaskStack read_masks_or_labels(const io::SampleBundle& b, int num_planes) {
  if (fs::exists(b.masks())) {
    ProbMaskStack m = io::read_masks_npy(b.masks());
    if (m.channels() != num_planes + 1) throw DimensionMismatch("masks.npy needs one channel per plane plus non-planar");
    return m;
  }
  return ProbMaskStack::one_hot(io::read_label_png(b.labels(), num_planes), num_planes + 1);
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string out;
  std::string scene;
  int max_cuboids = 2;
  int min_cuboids = 0;
  double noise_sigma = 0.01;
  double dropout = 0.1;
  double quantization = 0.0;
  double image_noise = 2.0;
  bool mesh = false;
  int subdivisions = 6;
  int frames = 0;
  FilterConfig filter{0.01, 0.0, kDefaultPlaneCapacity};
};

/// Camera path for a synthetic trajectory: a slow sway around the scene camera.
inline std::vector<Frame> synth_trajectory(const SceneSpec& spec, int frames) {
  std::vector<Frame> out;
  for (int f = 0; f < frames; ++f) {
    SceneSpec s = spec;
    s.camera_position.x() += 0.15 * std::sin(0.21 * f);
    s.camera_position.y() += 0.10 * std::sin(0.13 * f);
    s.yaw_deg += 6.0 * std::sin(0.17 * f);
    s.pitch_deg += 2.0 * std::sin(0.11 * f);
    s.validate();
    out.push_back({s.intrinsics, s.pose()});
  }
  return out;
}

inline void run_synth(const SynthOptions& o, const Globals& g, std::ostream& out) {
  SceneSpec spec;
  if (!o.scene.empty()) {
    spec = io::scene_from_json(io::read_json(o.scene));
  } else {
    RandomSceneOptions ro;
    ro.max_cuboids = o.max_cuboids;
    ro.min_cuboids = o.min_cuboids;
    if (ro.min_cuboids < 0 || ro.max_cuboids < ro.min_cuboids) throw InvalidConfig("synth: need 0 <= min-cuboids <= max-cuboids");
    spec = random_scene(g.seed, ro);
  }
  spec.image_noise = o.image_noise;
  const SceneRender r = render_scene(spec);
  const Frame frame{r.intrinsics, r.pose};
  const FilterOutcome f = filter_sample_detailed(r.labels, r.depth, r.planes.planes, frame, o.filter);
  if (!f.sample) throw Error("synth: scene rejected by the plane filter (" + f.reason + ")");
  const GroundTruthSample& s = *f.sample;

  // Role assignment re-indexed to the filtered plane list.
  RoleAssignment roles;
  for (int role = 0; role < kNumRoles; ++role) {
    if (!r.role_planes.plane[role]) continue;
    const Vec3 p = r.planes.planes[*r.role_planes.plane[role]].param();
    for (std::size_t j = 0; j < s.planes.size(); ++j) {
      if (s.planes.planes[j].param() == p) roles.plane[role] = j;
    }
  }
  NoiseSpec noise{o.noise_sigma, o.dropout, o.quantization};
  const DepthMap input = corrupt(r.depth, noise, derive_seed(g.seed, 2));

  const io::SampleBundle b{o.out};
  io::Sample sample{r.intrinsics, s.planes, s.labels, s.depth, r.image, r.roles};
  io::write_sample(o.out, sample);
  io::write_depth_png(b.input_depth(), input);
  io::write_json(b.roles_json(), io::roles_to_json(roles, r.visible_roles));
  Json scene = io::scene_to_json(spec);
  scene["seed"] = g.seed;
  scene["noise"] = Json{{"depth_gaussian_sigma", noise.depth_gaussian_sigma},
                        {"dropout_fraction", noise.dropout_fraction},
                        {"quantization_step", noise.quantization_step}};
  io::write_json(fs::path(o.out) / "scene.json", scene);
  if (o.mesh) io::write_ply(fs::path(o.out) / "mesh.ply", emit_mesh(spec, o.subdivisions));
  if (o.frames > 0) io::write_json(fs::path(o.out) / "trajectory.json", io::trajectory_to_json(synth_trajectory(spec, o.frames)));
  out << "synth: " << s.planes.size() << " planes, coverage " << s.planar_coverage << ", configuration "
      << r.visible_roles.name() << " -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// gen-gt

struct GenGtOptions {
  std::vector<std::string> scenes;
  std::string out;
  DatasetConfig dataset;
};

inline void write_dataset_sample(const fs::path& dir, const DatasetSample& d) {
  io::Sample s{d.sample.frame.intrinsics, d.sample.planes, d.sample.labels, d.sample.depth, std::nullopt, std::nullopt};
  io::write_sample(dir, s);
  io::write_json(dir / "pose.json", io::pose_to_json(d.sample.frame.pose));
}

inline void run_gen_gt(GenGtOptions o, const Globals& g, std::ostream& out) {
  o.dataset.rng_seed = g.seed;
  std::vector<SceneInput> scenes;
  for (const auto& dir : o.scenes) {
    SceneInput in;
    in.name = fs::path(dir).filename().string();
    if (in.name.empty()) in.name = fs::path(dir).parent_path().filename().string();
    in.mesh = io::read_ply(fs::path(dir) / "mesh.ply");
    in.trajectory = io::trajectory_from_json(io::read_json(fs::path(dir) / "trajectory.json"));
    scenes.push_back(std::move(in));
  }
  const Dataset ds = build_dataset(scenes, o.dataset);
  auto sample_dir = [&](const DatasetSample& d, bool train) {
    return fs::path(o.out) / (train ? "train" : "test") / d.scene / std::to_string(d.frame);
  };
  for (const auto& d : ds.train) write_dataset_sample(sample_dir(d, true), d);
  for (const auto& d : ds.test) write_dataset_sample(sample_dir(d, false), d);
  Json manifest = Json::array();
  for (const auto& e : ds.manifest) {
    manifest.push_back(Json{{"scene", e.scene},
                            {"frame", e.frame},
                            {"split", e.train ? "train" : "test"},
                            {"accepted", e.accepted},
                            {"reason", e.reason},
                            {"num_planes", e.num_planes},
                            {"coverage", e.coverage}});
  }
  Json dropped = Json::object();
  for (std::size_t s = 0; s < scenes.size(); ++s) dropped[scenes[s].name] = ds.dropped_triangles[s];
  io::write_json(fs::path(o.out) / "manifest.json",
                 Json{{"seed", g.seed},
                      {"stride", o.dataset.stride},
                      {"split", o.dataset.split},
                      {"train_scenes", ds.train_scenes},
                      {"test_scenes", ds.test_scenes},
                      {"dropped_triangles", dropped},
                      {"frames", manifest}});
  out << "gen-gt: " << ds.train.size() << " train / " << ds.test.size() << " test samples -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// extract

struct ExtractOptions {
  std::string in;
  std::string out;
  RansacConfig ransac;
  int stride = 1;
  int capacity = kDefaultPlaneCapacity;
  bool manhattan = false;
};

inline void run_extract(ExtractOptions o, const Globals& g, std::ostream& out) {
  o.ransac.rng_seed = g.seed;
  const io::SampleBundle b{o.in};
  const CameraIntrinsics k = io::read_intrinsics_json(b.intrinsics());
  const DepthMap depth = read_input_depth(b);
  require_same_size(depth.size(), k.size(), "extract: depth vs intrinsics");
  if (o.capacity < 1) throw InvalidConfig("extract: capacity must be >= 1");
  const Point3Set pts = depth_to_points(depth, k, o.stride);
  ExtractionResult res = extract_planes_detailed(pts, o.ransac);
  if (res.planes.size() > static_cast<std::size_t>(o.capacity)) res.planes.erase(res.planes.begin() + o.capacity, res.planes.end());
  PlaneSet set;
  set.capacity = o.capacity;
  if (o.manhattan) {
    std::vector<Plane> planes;
    std::vector<double> weights;
    for (const auto& e : res.planes) {
      planes.push_back(e.plane);
      weights.push_back(static_cast<double>(e.inlier_indices.size()));
    }
    const ManhattanFrame frame = vote_manhattan(planes, weights);
    set.planes = snap_to_manhattan(std::span<const ExtractedPlane>(res.planes), frame, pts);
  } else {
    for (const auto& e : res.planes) set.planes.push_back(e.plane);
  }
  io::write_planes_json(o.out, set);
  out << "extract: " << set.planes.size() << " planes, coverage " << res.coverage << " -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// segment

struct SegmentOptions {
  std::string in;
  std::string planes;
  std::string out;
  std::string method = "mrf";
  std::string solver = "icm";
  MrfConfig mrf;
};

inline void run_segment(SegmentOptions o, const Globals& g, std::ostream& out) {
  o.mrf.rng_seed = g.seed;
  o.mrf.solver = o.solver == "alpha-expansion" ? MrfSolver::alpha_expansion : MrfSolver::icm;
  const io::SampleBundle b{o.in};
  const CameraIntrinsics k = io::read_intrinsics_json(b.intrinsics());
  const DepthMap depth = read_input_depth(b);
  const RgbImage rgb = read_rgb_or_gray(b, k);
  PlaneSet hyp = io::read_planes_json(o.planes.empty() ? b.planes() : fs::path(o.planes));
  LabelMap labels;
  if (o.method == "mws") {
    MwsConfig cfg;
    cfg.mrf = o.mrf;
    std::vector<double> weights;
    const Point3Set pts = depth_to_points(depth, k);
    for (const auto& p : hyp.planes) {
      double w = 0.0;
      for (const auto& x : pts.points) w += p.distance(x) <= cfg.snap_inlier_threshold;
      weights.push_back(w);
    }
    const ManhattanFrame frame = vote_manhattan(hyp.planes, weights, cfg.manhattan);
    MwsResult r = mws_segment_detailed(depth, rgb, hyp.planes, k, frame, cfg);
    labels = std::move(r.labels);
    hyp.planes = std::move(r.planes);
  } else {
    labels = mrf_segment(depth, rgb, hyp.planes, k, o.mrf);
  }
  const io::SampleBundle ob{o.out};
  const DepthMap pw = piecewise_depth(labels, hyp.planes, k, &depth);
  io::write_sample(o.out, io::Sample{k, hyp, labels, pw, std::nullopt, std::nullopt});
  io::write_masks_npy(ob.masks(), ProbMaskStack::one_hot(labels, static_cast<int>(hyp.size()) + 1));
  std::size_t planar = 0;
  for (std::size_t i = 0; i < labels.pixels(); ++i) planar += labels.planar(i);
  out << "segment: " << hyp.size() << " planes, " << planar << " planar pixels -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// refine-crf

struct RefineCrfOptions {
  std::string in;
  std::string masks;
  std::string rgb;
  std::string out;
  std::string labels_out;
  std::string mode = "auto";
  DcrfConfig dcrf;
};

inline void run_refine_crf(RefineCrfOptions o, const Globals& g, std::ostream& out) {
  o.dcrf.threads = g.resolved_threads();
  o.dcrf.mode = dcrf_mode(o.mode);
  const io::SampleBundle b{o.in};
  const fs::path masks_path = o.masks.empty() ? b.masks() : fs::path(o.masks);
  const fs::path rgb_path = o.rgb.empty() ? b.rgb() : fs::path(o.rgb);
  const ProbMaskStack masks = io::read_masks_npy(masks_path);
  const RgbImage rgb = io::read_rgb_png(rgb_path);
  const ProbMaskStack refined = dcrf_refine(masks, rgb, o.dcrf);
  io::write_masks_npy(o.out, refined);
  if (!o.labels_out.empty()) {
    const LabelMap l = masks_to_labels(refined);
    io::write_label_png(o.labels_out, l);
  }
  out << "refine-crf: " << refined.channels() << " channels, " << o.dcrf.iterations << " iterations -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::vector<std::string> pred;
  std::vector<std::string> gt;
  std::string format = "json";
  std::string out;
  std::string svg;
  std::string averaging = "micro";
  bool permissive = false;
};

inline void run_eval(const EvalOptions& o, std::ostream& out) {
  if (o.pred.size() != o.gt.size() || o.pred.empty()) throw InvalidConfig("eval: give matching --pred and --gt lists");
  RecallAccumulator acc;
  DepthStatsAccumulator all, planar, edge;
  MatchConfig mc;
  mc.mode = o.permissive ? MatchMode::permissive : MatchMode::one_to_one;
  for (std::size_t i = 0; i < o.pred.size(); ++i) {
    const io::Sample gt = io::read_sample(o.gt[i]);
    const io::SampleBundle pb{o.pred[i]};
    const PlaneSet pred_planes = io::read_planes_json(pb.planes());
    const LabelMap pred_labels = io::read_label_png(pb.labels(), static_cast<int>(pred_planes.size()));
    require_same_size(pred_labels.size(), gt.intrinsics.size(), "eval: prediction vs ground truth");
    const PlaneMasks gm = PlaneMasks::from_labels(gt.labels, gt.planes.planes);
    const PlaneMasks pm = PlaneMasks::from_labels(pred_labels, pred_planes.planes);
    const auto matches = match_planes(gm, pm, gt.intrinsics, mc);
    std::size_t gt_planes = 0;
    for (std::size_t j = 0; j < gm.masks.size(); ++j) gt_planes += gm.area(j) > 0;
    acc.add(matches, gt_planes, gm.planar_pixels());
    const DepthMap pred_depth = fs::exists(pb.depth()) ? io::read_depth_png(pb.depth())
                                                        : piecewise_depth(pred_labels, pred_planes.planes, gt.intrinsics);
    require_same_size(pred_depth.size(), gt.depth.size(), "eval: depth maps");
    all.add(pred_depth, gt.depth);
    const auto pr = planar_region(gt.labels);
    const auto er = edge_region(gt.labels);
    planar.add(pred_depth, gt.depth, pr);
    edge.add(pred_depth, gt.depth, er);
  }
  const RecallCurve c = o.averaging == "macro" ? acc.macro() : acc.micro();
  auto stats_or_null = [](const DepthStatsAccumulator& a) -> Json {
    if (a.count() == 0) return nullptr;
    return depth_stats_json(a.stats());
  };
  std::string text;
  if (o.format == "csv") {
    std::ostringstream ss;
    ss << "metric,threshold,value\n";
    for (std::size_t t = 0; t < c.thresholds.size(); ++t) ss << "plane_recall," << c.thresholds[t] << ',' << c.plane_recall[t] << '\n';
    for (std::size_t t = 0; t < c.thresholds.size(); ++t) ss << "pixel_recall," << c.thresholds[t] << ',' << c.pixel_recall[t] << '\n';
    for (const auto& [name, a] : {std::pair<const char*, const DepthStatsAccumulator*>{"all", &all}, {"planar", &planar}, {"edge", &edge}}) {
      if (a->count() == 0) continue;
      const Json s = depth_stats_json(a->stats());
      for (auto it = s.begin(); it != s.end(); ++it) ss << "depth_" << name << '_' << it.key() << ",," << it.value().dump() << '\n';
    }
    text = ss.str();
  } else {
    Json j{{"images", o.pred.size()},
           {"averaging", o.averaging},
           {"thresholds", c.thresholds},
           {"plane_recall", c.plane_recall},
           {"pixel_recall", c.pixel_recall},
           {"depth", Json{{"all", stats_or_null(all)}, {"planar", stats_or_null(planar)}, {"edge", stats_or_null(edge)}}}};
    text = j.dump(2) + "\n";
  }
  if (o.out.empty()) {
    out << text;
  } else {
    io::write_file_atomic(o.out, text);
  }
  if (!o.svg.empty()) {
    io::write_file_atomic(o.svg, io::recall_svg({{"plane recall", c.thresholds, c.plane_recall},
                                                 {"pixel recall", c.thresholds, c.pixel_recall}},
                                                "Recall vs depth threshold", "depth threshold (m)"));
  }
}

// ---------------------------------------------------------------------------
// eval-loss

struct EvalLossOptions {
  std::string pred;
  std::string gt;
  std::string form = "cross-entropy";
  bool symmetric = false;
  std::string out;
};

inline void run_eval_loss(const EvalLossOptions& o, std::ostream& out) {
  const io::Sample gt = io::read_sample(o.gt);
  const io::SampleBundle pb{o.pred};
  const PlaneSet pred = io::read_planes_json(pb.planes());
  const int K = static_cast<int>(pred.size());
  const ProbMaskStack masks = read_masks_or_labels(pb, K);
  require_same_size(masks.size(), gt.intrinsics.size(), "eval-loss: masks vs ground truth");
  const ChamferReport ch = chamfer_plane_loss(gt.planes, pred, o.symmetric);

  // Ground-truth planes map to their nearest prediction's channel.
  LabelMap target(gt.labels.width(), gt.labels.height(), K);
  for (std::size_t i = 0; i < gt.labels.pixels(); ++i) {
    if (gt.labels.planar(i)) target.set(i, static_cast<int>(ch.match[static_cast<std::size_t>(gt.labels[i])]));
  }
  const auto form = o.form == "printed-complement" ? SegmentationLossForm::printed_complement : SegmentationLossForm::cross_entropy;
  const SegmentationReport seg = segmentation_loss(masks, target, form);
  const DepthMap nonplanar = fs::exists(pb.depth()) ? io::read_depth_png(pb.depth()) : DepthMap(masks.width(), masks.height());
  const DepthLossReport dl = weighted_depth_loss(masks, pred, nonplanar, gt.depth, gt.intrinsics);
  Json j{{"plane_loss", ch.value},
         {"segmentation_loss", seg.value},
         {"segmentation_loss_mean", seg.mean},
         {"segmentation_form", o.form},
         {"depth_loss", dl.value},
         {"depth_loss_mean", dl.mean},
         {"depth_pixels", dl.valid_pixels}};
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    io::write_file_atomic(o.out, text);
  }
}

// ---------------------------------------------------------------------------
// layout

struct LayoutOptions {
  std::string in;
  std::string roles;
  std::string out;
  std::string gt_roles;
};

inline void run_layout(const LayoutOptions& o, std::ostream& out) {
  const io::SampleBundle b{o.in};
  const CameraIntrinsics k = io::read_intrinsics_json(b.intrinsics());
  const PlaneSet planes = io::read_planes_json(b.planes());
  const ProbMaskStack masks = read_masks_or_labels(b, static_cast<int>(planes.size()));
  RoleAssignment roles;
  if (!o.roles.empty()) {
    roles = io::roles_from_json(io::read_json(o.roles)).first;
  } else {
    roles = propose_roles(planes.planes);
  }
  const LayoutResult r = estimate_layout(planes.planes, roles, masks, k);
  io::write_label_png(fs::path(o.out) / "layout.png", r.roles);
  Json catalog = Json::array();
  for (std::size_t c = 0; c < layout_catalog().size(); ++c) {
    catalog.push_back(Json{{"configuration", layout_catalog()[c].name()}, {"score", r.catalog_scores[c]}});
  }
  Json j{{"configuration", r.configuration.name()}, {"score", r.score}, {"roles", io::roles_to_json(roles)["roles"]}};
  if (!o.gt_roles.empty()) j["pixel_error"] = layout_pixel_error(r.roles, io::read_label_png(o.gt_roles, kNumRoles));
  j["catalog"] = catalog;
  io::write_json(fs::path(o.out) / "layout.json", j);
  out << "layout: " << r.configuration.name() << " (score " << r.score << ") -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// grad-check

struct GradCheckOptions {
  int instances = 100;
  double step = 1e-5;
  double tolerance = 1e-5;
  std::string out;
};

/// Norm-wise relative error between an analytic and a numeric gradient.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::max(std::sqrt(std::max(na, nn)), 1e-12);
  return std::sqrt(diff) / scale;
}

struct GradCheckReport {
  double chamfer = 0.0;
  double segmentation_ce = 0.0;
  double segmentation_complement = 0.0;
  double depth = 0.0;
  int instances = 0;
};

/// Random instances away from ties and undefined depths; max relative error per loss.
inline GradCheckReport grad_check(int instances, double h, std::uint64_t seed) {
  GradCheckReport rep;
  rep.instances = instances;
  Rng rng(derive_seed(seed, 0x6CA));
  const CameraIntrinsics k{4.0, 4.0, 2.5, 1.5, 6, 4};
  for (int n = 0; n < instances; ++n) {
    // Plane loss: well separated predictions so the nearest one is unique.
    {
      std::vector<Vec3> gt, pred;
      for (int i = 0; i < 3; ++i) gt.push_back(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 3)));
      for (int j = 0; j < 4; ++j) pred.push_back(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 3)));
      const auto rep0 = chamfer_plane_loss(gt, pred, n % 2 == 1);
      std::vector<double> a, num;
      for (std::size_t j = 0; j < pred.size(); ++j) {
        for (int c = 0; c < 3; ++c) {
          a.push_back(rep0.grad[j](c));
          auto p = pred, m = pred;
          p[j](c) += h;
          m[j](c) -= h;
          num.push_back((chamfer_plane_loss(gt, p, n % 2 == 1).value - chamfer_plane_loss(gt, m, n % 2 == 1).value) / (2 * h));
        }
      }
      rep.chamfer = std::max(rep.chamfer, relative_error(a, num));
    }
    // Segmentation losses with respect to logits.
    {
      const int C = 4;
      ProbMaskStack logits(k.width, k.height, C);
      for (double& x : logits.data()) x = rng.uniform(-2.0, 2.0);
      LabelMap gt(k.width, k.height, C - 1);
      for (std::size_t i = 0; i < gt.pixels(); ++i) gt.set(i, static_cast<int>(rng.index(C)));
      for (auto form : {SegmentationLossForm::cross_entropy, SegmentationLossForm::printed_complement}) {
        const auto r0 = segmentation_loss_from_logits(logits, gt, form);
        std::vector<double> num;
        for (std::size_t i = 0; i < logits.data().size(); ++i) {
          ProbMaskStack p = logits, m = logits;
          p.data()[i] += h;
          m.data()[i] -= h;
          num.push_back((segmentation_loss_from_logits(p, gt, form).value - segmentation_loss_from_logits(m, gt, form).value) / (2 * h));
        }
        double& slot = form == SegmentationLossForm::cross_entropy ? rep.segmentation_ce : rep.segmentation_complement;
        slot = std::max(slot, relative_error(r0.grad_logits, num));
      }
    }
    // Depth loss with respect to plane parameters, masks and the non-planar map.
    {
      const int K = 2;
      std::vector<Vec3> params;
      for (int j = 0; j < K; ++j) {
        params.push_back(Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0) * rng.uniform(1.5, 4.0));
      }
      ProbMaskStack masks(k.width, k.height, K + 1);
      for (double& x : masks.data()) x = rng.uniform(0.05, 1.0);
      DepthMap gt(k.width, k.height), nonplanar(k.width, k.height);
      for (std::size_t i = 0; i < gt.pixels(); ++i) {
        if (rng.uniform() < 0.9) gt.set(i, rng.uniform(1.0, 5.0));
        nonplanar.set(i, rng.uniform(1.0, 5.0));
      }
      const auto r0 = weighted_depth_loss(masks, params, nonplanar, gt, k);
      auto value = [&](const ProbMaskStack& m, const std::vector<Vec3>& p, const DepthMap& np) {
        return weighted_depth_loss(m, p, np, gt, k).value;
      };
      std::vector<double> a, num;
      for (int j = 0; j < K; ++j) {
        for (int c = 0; c < 3; ++c) {
          a.push_back(r0.grad_planes[j](c));
          auto p = params, m = params;
          p[j](c) += h;
          m[j](c) -= h;
          num.push_back((value(masks, p, nonplanar) - value(masks, m, nonplanar)) / (2 * h));
        }
      }
      for (std::size_t i = 0; i < masks.data().size(); ++i) {
        a.push_back(r0.grad_masks[i]);
        ProbMaskStack p = masks, m = masks;
        p.data()[i] += h;
        m.data()[i] -= h;
        num.push_back((value(p, params, nonplanar) - value(m, params, nonplanar)) / (2 * h));
      }
      for (std::size_t i = 0; i < nonplanar.pixels(); ++i) {
        a.push_back(r0.grad_nonplanar[i]);
        DepthMap p = nonplanar, m = nonplanar;
        p.set(i, nonplanar.depth(i) + h);
        m.set(i, nonplanar.depth(i) - h);
        num.push_back((value(masks, params, p) - value(masks, params, m)) / (2 * h));
      }
      rep.depth = std::max(rep.depth, relative_error(a, num));
    }
  }
  return rep;
}

inline bool run_grad_check(const GradCheckOptions& o, const Globals& g, std::ostream& out) {
  if (o.instances < 1 || !(o.step > 0.0)) throw InvalidConfig("grad-check: instances >= 1 and step > 0 required");
  const GradCheckReport r = grad_check(o.instances, o.step, g.seed);
  const bool pass = std::max({r.chamfer, r.segmentation_ce, r.segmentation_complement, r.depth}) < o.tolerance;
  Json j{{"instances", r.instances},
         {"step", o.step},
         {"tolerance", o.tolerance},
         {"max_relative_error",
          Json{{"plane_loss", r.chamfer},
               {"segmentation_cross_entropy", r.segmentation_ce},
               {"segmentation_printed_complement", r.segmentation_complement},
               {"depth_loss", r.depth}}},
         {"pass", pass}};
  if (o.out.empty()) {
    out << j.dump(2) << "\n";
  } else {
    io::write_json(o.out, j);
  }
  return pass;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Piecewise planar reconstruction toolkit", "planekit"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file with option values; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  Globals g;
  app.add_option("--seed", g.seed, "seed for every random number generator")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (default: PLANEKIT_THREADS or 1)")->check(CLI::NonNegativeNumber);

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "render a seeded synthetic room with analytic ground truth");
  synth->add_option("--out", so.out, "output sample directory")->required();
  synth->add_option("--scene", so.scene, "scene JSON instead of a random room")->check(CLI::ExistingFile);
  synth->add_option("--max-cuboids", so.max_cuboids)->capture_default_str();
  synth->add_option("--min-cuboids", so.min_cuboids)->capture_default_str();
  synth->add_option("--noise-sigma", so.noise_sigma, "input depth noise (m)")->capture_default_str();
  synth->add_option("--dropout", so.dropout, "input depth dropout fraction")->capture_default_str();
  synth->add_option("--quantization", so.quantization, "input depth quantisation step (m)")->capture_default_str();
  synth->add_option("--image-noise", so.image_noise, "colour noise standard deviation")->capture_default_str();
  synth->add_flag("--mesh", so.mesh, "also write mesh.ply");
  synth->add_option("--subdivisions", so.subdivisions, "mesh face subdivisions")->capture_default_str();
  synth->add_option("--frames", so.frames, "also write a trajectory with this many frames")->capture_default_str();
  synth->add_option("--min-plane-area", so.filter.min_plane_area)->capture_default_str();
  synth->add_option("--k-max", so.filter.k_max)->capture_default_str();

  GenGtOptions go;
  auto* gengt = app.add_subcommand("gen-gt", "ground truth from labelled meshes and trajectories");
  gengt->add_option("--scene", go.scenes, "scene directory with mesh.ply and trajectory.json")->required()->check(CLI::ExistingDirectory);
  gengt->add_option("--out", go.out, "output dataset directory")->required();
  gengt->add_option("--stride", go.dataset.stride, "frame subsampling")->capture_default_str();
  gengt->add_option("--split", go.dataset.split, "training fraction of scenes")->capture_default_str();
  add_ransac_options(gengt, go.dataset.ransac);
  gengt->add_option("--max-normal-angle", go.dataset.merge.max_normal_angle)->capture_default_str();
  gengt->add_option("--max-mean-distance", go.dataset.merge.max_mean_distance)->capture_default_str();
  gengt->add_flag("--symmetric-distance", go.dataset.merge.symmetric_distance);
  gengt->add_option("--min-plane-area", go.dataset.filter.min_plane_area)->capture_default_str();
  gengt->add_option("--min-coverage", go.dataset.filter.min_frame_coverage)->capture_default_str();
  gengt->add_option("--k-max", go.dataset.filter.k_max)->capture_default_str();

  ExtractOptions eo;
  auto* extract = app.add_subcommand("extract", "RANSAC plane hypotheses from a depth map");
  extract->add_option("--in", eo.in, "sample directory")->required()->check(CLI::ExistingDirectory);
  extract->add_option("--out", eo.out, "planes JSON")->required();
  add_ransac_options(extract, eo.ransac);
  extract->add_option("--stride", eo.stride, "pixel subsampling")->capture_default_str();
  extract->add_option("--capacity", eo.capacity, "plane capacity K")->capture_default_str();
  extract->add_flag("--manhattan", eo.manhattan, "snap planes to the dominant Manhattan frame");

  SegmentOptions sgo;
  auto* segment = app.add_subcommand("segment", "MRF segmentation into plane hypotheses");
  segment->add_option("--in", sgo.in, "sample directory")->required()->check(CLI::ExistingDirectory);
  segment->add_option("--planes", sgo.planes, "hypotheses JSON (default: the sample's planes.json)")->check(CLI::ExistingFile);
  segment->add_option("--out", sgo.out, "output sample directory")->required();
  segment->add_option("--method", sgo.method, "mrf or mws")->check(CLI::IsMember({"mrf", "mws"}))->capture_default_str();
  add_mrf_options(segment, sgo.mrf, sgo.solver);

  RefineCrfOptions ro;
  auto* crf = app.add_subcommand("refine-crf", "dense CRF refinement of a mask stack");
  crf->add_option("--in", ro.in, "directory holding masks.npy and rgb.png");
  crf->add_option("--masks", ro.masks, "mask stack (.npy)");
  crf->add_option("--rgb", ro.rgb, "colour image");
  crf->add_option("--out", ro.out, "refined mask stack (.npy)")->required();
  crf->add_option("--labels-out", ro.labels_out, "argmax label PNG");
  add_dcrf_options(crf, ro.dcrf, ro.mode);

  EvalOptions evo;
  auto* eval = app.add_subcommand("eval", "plane / pixel recall and depth statistics");
  eval->add_option("--pred", evo.pred, "prediction sample directories")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gt", evo.gt, "ground-truth sample directories")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--format", evo.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  eval->add_option("--averaging", evo.averaging)->check(CLI::IsMember({"micro", "macro"}))->capture_default_str();
  eval->add_flag("--permissive", evo.permissive, "let one prediction validate several ground-truth planes");
  eval->add_option("--out", evo.out, "output file (default stdout)");
  eval->add_option("--svg", evo.svg, "recall plot");

  EvalLossOptions elo;
  auto* evloss = app.add_subcommand("eval-loss", "training losses of a prediction against ground truth");
  evloss->add_option("--pred", elo.pred)->required()->check(CLI::ExistingDirectory);
  evloss->add_option("--gt", elo.gt)->required()->check(CLI::ExistingDirectory);
  evloss->add_option("--form", elo.form)->check(CLI::IsMember({"cross-entropy", "printed-complement"}))->capture_default_str();
  evloss->add_flag("--symmetric", elo.symmetric, "two-sided plane loss");
  evloss->add_option("--out", elo.out, "output file (default stdout)");

  LayoutOptions lo;
  auto* layout = app.add_subcommand("layout", "box-room layout from planes and masks");
  layout->add_option("--in", lo.in, "sample directory")->required()->check(CLI::ExistingDirectory);
  layout->add_option("--roles", lo.roles, "role assignment JSON (default: geometric proposal)")->check(CLI::ExistingFile);
  layout->add_option("--out", lo.out, "output directory")->required();
  layout->add_option("--gt-roles", lo.gt_roles, "ground-truth role PNG for the pixel error")->check(CLI::ExistingFile);

  GradCheckOptions gco;
  auto* grad = app.add_subcommand("grad-check", "finite-difference check of the loss gradients");
  grad->add_option("--instances", gco.instances)->capture_default_str();
  grad->add_option("--step", gco.step)->capture_default_str();
  grad->add_option("--tolerance", gco.tolerance)->capture_default_str();
  grad->add_option("--out", gco.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "planekit: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) run_synth(so, g, out);
    if (gengt->parsed()) run_gen_gt(go, g, out);
    if (extract->parsed()) run_extract(eo, g, out);
    if (segment->parsed()) run_segment(sgo, g, out);
    if (crf->parsed()) {
      if (ro.in.empty() && (ro.masks.empty() || ro.rgb.empty())) throw InvalidConfig("refine-crf: give --in or both --masks and --rgb");
      run_refine_crf(ro, g, out);
    }
    if (eval->parsed()) run_eval(evo, out);
    if (evloss->parsed()) run_eval_loss(elo, out);
    if (layout->parsed()) run_layout(lo, out);
    if (grad->parsed() && !run_grad_check(gco, g, out)) {
      err << "planekit: gradient check above tolerance\n";
      return 1;
    }
  } catch (const ValidationError& e) {
    err << "planekit: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "planekit: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace planekit::cli

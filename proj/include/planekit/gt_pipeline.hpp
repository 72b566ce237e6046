#pragma once

// Ground-truth generation from semantically labelled meshes: per-label plane
// fitting, cross-label merging, z-buffered rasterisation of plane-consistent
// triangles into camera frames, and plane / frame filtering.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/image.hpp"
#include "planekit/losses.hpp"
#include "planekit/random.hpp"
#include "planekit/ransac.hpp"

namespace planekit {

struct SemanticMesh {
  std::vector<Vec3> vertices;  ///< world metres
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> vertex_labels;

  /// Throws BadFormat when indices or the label count are inconsistent.
  void validate() const {
    if (vertex_labels.size() != vertices.size()) throw BadFormat("mesh: one semantic label per vertex required");
    const auto n = static_cast<long long>(vertices.size());
    for (const auto& t : triangles) {
      for (int i : t) {
        if (i < 0 || i >= n) throw BadFormat("mesh: triangle index out of range");
      }
    }
  }

  bool triangle_uniform(const std::array<int, 3>& t) const {
    return vertex_labels[t[0]] == vertex_labels[t[1]] && vertex_labels[t[1]] == vertex_labels[t[2]];
  }
};

struct MeshIngest {
  SemanticMesh mesh;
  std::size_t dropped_triangles = 0;
};

/// Validates indices and drops triangles whose vertices carry different labels.
inline MeshIngest ingest_mesh(SemanticMesh mesh) {
  mesh.validate();
  MeshIngest out;
  std::vector<std::array<int, 3>> kept;
  for (const auto& t : mesh.triangles) {
    if (mesh.triangle_uniform(t)) {
      kept.push_back(t);
    } else {
      ++out.dropped_triangles;
    }
  }
  mesh.triangles = std::move(kept);
  out.mesh = std::move(mesh);
  return out;
}

/// Planes fitted to mesh vertices. Planes are stored relative to `anchor`
/// (a plane through the world origin has no P = d*n encoding), i.e. plane j
/// is { x : n_j . (x - anchor) = d_j }.
struct FittedMeshPlanes {
  Vec3 anchor = Vec3::Zero();
  std::vector<Plane> planes;
  std::vector<int> vertex_assignment;          ///< plane id per vertex, -1 when unassigned
  std::vector<std::vector<int>> plane_labels;  ///< ascending semantic labels spanned by each plane
  std::vector<int> unplaned_labels;
  double inlier_threshold = 0.05;

  double distance(int plane, const Vec3& world) const { return planes[plane].distance(world - anchor); }

  /// Plane j in the camera frame of `pose`.
  Plane camera_plane(int plane, const Pose& pose) const {
    const Plane& p = planes[plane];
    const Vec3 n = pose.rotation * p.normal();
    return Plane::from_signed(n, p.offset() + p.normal().dot(anchor) + n.dot(pose.translation));
  }

  std::vector<std::size_t> vertex_counts() const {
    std::vector<std::size_t> c(planes.size(), 0);
    for (int a : vertex_assignment) {
      if (a >= 0) ++c[a];
    }
    return c;
  }
};

/// Anchor placed away from the mesh so that no realistic surface passes through it.
inline Vec3 fitting_anchor(const SemanticMesh& mesh) {
  if (mesh.vertices.empty()) return Vec3::Zero();
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const double span = std::max((hi - lo).norm(), 1.0);
  return lo - span * Vec3(0.5377, 0.6931, 0.8137);
}

/// RANSAC per semantic label (ascending label order, seed derived from the
/// label). Each vertex goes to the first of its label's planes within the
/// inlier threshold. Labels without a plane are recorded, not fatal.
inline FittedMeshPlanes fit_semantic_planes(const SemanticMesh& mesh, const RansacConfig& cfg) {
  mesh.validate();
  cfg.validate();
  if (mesh.vertices.empty()) throw PreconditionError("fit_semantic_planes: empty mesh");
  FittedMeshPlanes out;
  out.anchor = fitting_anchor(mesh);
  out.inlier_threshold = cfg.inlier_threshold;
  out.vertex_assignment.assign(mesh.vertices.size(), -1);

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) by_label[mesh.vertex_labels[i]].push_back(i);

  for (const auto& [label, members] : by_label) {
    Point3Set set;
    for (std::size_t i : members) set.points.push_back(mesh.vertices[i] - out.anchor);
    RansacConfig local = cfg;
    local.rng_seed = derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(label)));
    std::vector<ExtractedPlane> found;
    try {
      if (set.size() >= 3) found = extract_planes(set, local);
    } catch (const NoPlaneFound&) {
      found.clear();
    }
    if (found.empty()) {
      out.unplaned_labels.push_back(label);
      continue;
    }
    const int first = static_cast<int>(out.planes.size());
    for (const auto& e : found) {
      out.planes.push_back(e.plane);
      out.plane_labels.push_back({label});
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (std::size_t j = 0; j < found.size(); ++j) {
        if (found[j].plane.distance(set.points[k]) <= cfg.inlier_threshold) {
          out.vertex_assignment[members[k]] = first + static_cast<int>(j);
          break;
        }
      }
    }
  }
  return out;
}

struct MergeConfig {
  double max_normal_angle = 20.0;   ///< degrees
  double max_mean_distance = 0.05;  ///< metres
  /// Use the larger of the two directional mean distances instead of B -> A.
  bool symmetric_distance = false;

  void validate() const {
    if (!(max_normal_angle > 0.0 && max_mean_distance > 0.0)) throw InvalidConfig("merge: thresholds must be positive");
  }
};

/// Angle between unoriented plane normals, in degrees.
inline double unoriented_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> plane_members(const FittedMeshPlanes& f) {
  std::vector<std::vector<std::size_t>> m(f.planes.size());
  for (std::size_t i = 0; i < f.vertex_assignment.size(); ++i) {
    if (f.vertex_assignment[i] >= 0) m[f.vertex_assignment[i]].push_back(i);
  }
  return m;
}

inline double mean_distance(const FittedMeshPlanes& f, int plane, const std::vector<std::size_t>& members,
                            const SemanticMesh& mesh) {
  if (members.empty()) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i : members) s += f.distance(plane, mesh.vertices[i]);
  return s / static_cast<double>(members.size());
}

inline bool labels_disjoint(const std::vector<int>& a, const std::vector<int>& b) {
  for (int x : a) {
    if (std::binary_search(b.begin(), b.end(), x)) return false;
  }
  return true;
}

}  // namespace detail

/// Merge test for planes i and j: A is the plane with more vertices (i on
/// ties), B the other. Returns the mean distance when the pair qualifies.
inline std::optional<double> merge_predicate(const FittedMeshPlanes& f, const SemanticMesh& mesh, int i, int j,
                                             const MergeConfig& cfg,
                                             const std::vector<std::vector<std::size_t>>& members) {
  if (!detail::labels_disjoint(f.plane_labels[i], f.plane_labels[j])) return std::nullopt;
  int a = i, b = j;
  if (members[j].size() > members[i].size()) std::swap(a, b);
  if (!(unoriented_angle_deg(f.planes[a].normal(), f.planes[b].normal()) < cfg.max_normal_angle)) return std::nullopt;
  double dist = detail::mean_distance(f, a, members[b], mesh);
  if (cfg.symmetric_distance) dist = std::max(dist, detail::mean_distance(f, b, members[a], mesh));
  if (!(dist < cfg.max_mean_distance)) return std::nullopt;
  return dist;
}

/// Greedy merging across semantic labels, closest qualifying pair first. The
/// merged plane is refit on the union of both vertex sets; union vertices
/// farther than the inlier threshold from the refit become unassigned.
inline FittedMeshPlanes merge_planes(const SemanticMesh& mesh, FittedMeshPlanes fitted, const MergeConfig& cfg) {
  cfg.validate();
  if (fitted.vertex_assignment.size() != mesh.vertices.size()) {
    throw DimensionMismatch("merge_planes: assignment does not match the mesh");
  }
  while (fitted.planes.size() > 1) {
    auto members = detail::plane_members(fitted);
    std::optional<std::pair<int, int>> best;
    double best_dist = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(fitted.planes.size());
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        auto d = merge_predicate(fitted, mesh, i, j, cfg, members);
        if (d && *d < best_dist) {
          best_dist = *d;
          best = {i, j};
        }
      }
    }
    if (!best) break;
    const auto [i, j] = *best;
    std::vector<std::size_t> uni = members[i];
    uni.insert(uni.end(), members[j].begin(), members[j].end());
    std::sort(uni.begin(), uni.end());
    std::vector<Vec3> pts;
    for (std::size_t v : uni) pts.push_back(mesh.vertices[v] - fitted.anchor);
    Plane merged = fitted.planes[members[j].size() > members[i].size() ? j : i];
    try {
      merged = fit_plane_lsq(pts).plane;
    } catch (const Error&) {
      // Degenerate union: keep the larger plane's parameters.
    }
    fitted.planes[i] = merged;
    std::vector<int> labels = fitted.plane_labels[i];
    labels.insert(labels.end(), fitted.plane_labels[j].begin(), fitted.plane_labels[j].end());
    std::sort(labels.begin(), labels.end());
    fitted.plane_labels[i] = labels;
    for (std::size_t v : uni) {
      fitted.vertex_assignment[v] = merged.distance(mesh.vertices[v] - fitted.anchor) <= fitted.inlier_threshold ? i : -1;
    }
    fitted.planes.erase(fitted.planes.begin() + j);
    fitted.plane_labels.erase(fitted.plane_labels.begin() + j);
    for (int& a : fitted.vertex_assignment) {
      if (a > j) --a;
    }
  }
  return fitted;
}

struct RasterResult {
  LabelMap labels;  ///< plane ids of the fitted set; num_planes = unlabelled
  DepthMap depth;   ///< z of the nearest triangle, invalid where nothing was hit
  std::size_t occluding_triangles = 0;  ///< drawn triangles without a common plane id
};

inline constexpr double kNearClip = 1e-3;

namespace detail {

inline std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri, double near) {
  std::vector<Vec3> out;
  for (int k = 0; k < 3; ++k) {
    const Vec3& a = tri[k];
    const Vec3& b = tri[(k + 1) % 3];
    const bool ina = a.z() >= near, inb = b.z() >= near;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = (near - a.z()) / (b.z() - a.z());
      Vec3 c = a + t * (b - a);
      c.z() = near;
      out.push_back(c);
    }
  }
  return out;
}

inline double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

inline bool top_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

/// Rasterises one camera-frame triangle (all z >= near) with pixel-centre
/// sampling, a top-left fill rule and perspective-correct depth.
template <class Fn>
void raster_triangle(Vec3 a, Vec3 b, Vec3 c, const CameraIntrinsics& k, Fn&& emit) {
  Eigen::Vector2d pa = k.project(a), pb = k.project(b), pc = k.project(c);
  double area = edge(pa, pb, pc.x(), pc.y());
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) {
    std::swap(b, c);
    std::swap(pb, pc);
    area = -area;
  }
  const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({pa.x(), pb.x(), pc.x()}))));
  const int u1 = std::min(k.width - 1, static_cast<int>(std::floor(std::max({pa.x(), pb.x(), pc.x()}))));
  const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({pa.y(), pb.y(), pc.y()}))));
  const int v1 = std::min(k.height - 1, static_cast<int>(std::floor(std::max({pa.y(), pb.y(), pc.y()}))));
  const bool tl_ab = top_left(pa, pb), tl_bc = top_left(pb, pc), tl_ca = top_left(pc, pa);
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const double wc = edge(pa, pb, u, v), wa = edge(pb, pc, u, v), wb = edge(pc, pa, u, v);
      if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
      if ((wa == 0.0 && !tl_bc) || (wb == 0.0 && !tl_ca) || (wc == 0.0 && !tl_ab)) continue;
      const double inv_z = (wa / a.z() + wb / b.z() + wc / c.z()) / area;
      emit(u, v, 1.0 / inv_z);
    }
  }
}

}  // namespace detail

/// Z-buffered rasterisation of every mesh triangle. Triangles whose three
/// vertices share a plane id label their pixels with it; other triangles
/// still occlude and leave their pixels unlabelled with a valid depth.
inline RasterResult rasterize_frame(const SemanticMesh& mesh, const FittedMeshPlanes& fitted, const Frame& frame) {
  mesh.validate();
  frame.intrinsics.validate();
  frame.pose.validate();
  if (fitted.vertex_assignment.size() != mesh.vertices.size()) {
    throw DimensionMismatch("rasterize_frame: assignment does not match the mesh");
  }
  const CameraIntrinsics& k = frame.intrinsics;
  const int K = static_cast<int>(fitted.planes.size());
  RasterResult out{LabelMap(k.width, k.height, K), DepthMap(k.width, k.height), 0};
  std::vector<double> zbuf(k.size().pixels(), std::numeric_limits<double>::infinity());
  std::vector<Vec3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = frame.pose.apply(mesh.vertices[i]);

  for (const auto& t : mesh.triangles) {
    const int a = fitted.vertex_assignment[t[0]];
    const int label = (a >= 0 && a == fitted.vertex_assignment[t[1]] && a == fitted.vertex_assignment[t[2]]) ? a : K;
    const auto poly = detail::clip_near({cam[t[0]], cam[t[1]], cam[t[2]]}, kNearClip);
    if (poly.size() < 3) continue;
    bool drew = false;
    for (std::size_t f = 1; f + 1 < poly.size(); ++f) {
      detail::raster_triangle(poly[0], poly[f], poly[f + 1], k, [&](int u, int v, double z) {
        const std::size_t i = k.size().index(u, v);
        if (!(z < zbuf[i])) return;
        zbuf[i] = z;
        out.depth.set(i, z);
        out.labels.set(i, label);
        drew = true;
      });
    }
    if (drew && label == K) ++out.occluding_triangles;
  }
  return out;
}

struct FilterConfig {
  double min_plane_area = 0.01;      ///< fraction of image pixels
  double min_frame_coverage = 0.5;   ///< fraction of image pixels
  int k_max = kDefaultPlaneCapacity;

  void validate() const {
    if (!(min_plane_area >= 0.0 && min_plane_area <= 1.0 && min_frame_coverage >= 0.0 && min_frame_coverage <= 1.0)) {
      throw InvalidConfig("filter: fractions must lie in [0, 1]");
    }
    if (k_max < 1) throw InvalidConfig("filter: k_max must be >= 1");
  }
};

struct GroundTruthSample {
  Frame frame;
  LabelMap labels;
  DepthMap depth;
  PlaneSet planes;  ///< camera frame, descending area
  double planar_coverage = 0.0;
};

struct FilterOutcome {
  std::optional<GroundTruthSample> sample;
  double coverage = 0.0;     ///< after plane filtering
  std::string reason;        ///< empty when accepted
  std::size_t dropped_small = 0;
  std::size_t dropped_cap = 0;
};

/// Drops small planes, caps the plane count at k_max by area, rejects frames
/// with too little planar coverage and re-indexes survivors by descending
/// area. Labelled pixels get the plane-induced depth of their plane.
inline FilterOutcome filter_sample_detailed(const LabelMap& labels, const DepthMap& depth,
                                            std::span<const Plane> camera_planes, const Frame& frame,
                                            const FilterConfig& cfg = {}) {
  cfg.validate();
  const CameraIntrinsics& k = frame.intrinsics;
  require_same_size(labels.size(), depth.size(), "filter_sample: labels vs depth");
  require_same_size(labels.size(), k.size(), "filter_sample: labels vs intrinsics");
  if (static_cast<std::size_t>(labels.num_planes()) != camera_planes.size()) {
    throw DimensionMismatch("filter_sample: label map and plane list disagree on the plane count");
  }
  const double total = static_cast<double>(labels.pixels());
  const auto areas = labels.areas();
  std::vector<int> order;
  FilterOutcome out;
  for (std::size_t j = 0; j < areas.size(); ++j) {
    if (areas[j] == 0) continue;
    if (static_cast<double>(areas[j]) / total >= cfg.min_plane_area) {
      order.push_back(static_cast<int>(j));
    } else {
      ++out.dropped_small;
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return areas[a] > areas[b]; });
  if (order.size() > static_cast<std::size_t>(cfg.k_max)) {
    out.dropped_cap = order.size() - static_cast<std::size_t>(cfg.k_max);
    order.resize(static_cast<std::size_t>(cfg.k_max));
  }
  std::size_t covered = 0;
  for (int j : order) covered += areas[j];
  out.coverage = total > 0.0 ? static_cast<double>(covered) / total : 0.0;
  if (order.empty()) {
    out.reason = "no plane above the minimum area";
    return out;
  }
  if (out.coverage < cfg.min_frame_coverage) {
    out.reason = "planar coverage below the minimum";
    return out;
  }
  std::vector<int> remap(areas.size(), -1);
  GroundTruthSample s;
  s.frame = frame;
  s.planes.capacity = std::max(cfg.k_max, static_cast<int>(order.size()));
  for (std::size_t r = 0; r < order.size(); ++r) {
    remap[order[r]] = static_cast<int>(r);
    s.planes.planes.push_back(camera_planes[order[r]]);
  }
  const int K = static_cast<int>(order.size());
  s.labels = LabelMap(labels.width(), labels.height(), K);
  s.depth = depth;
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      const std::size_t i = labels.size().index(u, v);
      if (!labels.planar(i) || remap[labels[i]] < 0) continue;
      const int r = remap[labels[i]];
      if (auto z = plane_depth(s.planes.planes[r], u, v, k)) {
        s.labels.set(i, r);
        s.depth.set(i, *z);
      }
    }
  }
  s.planar_coverage = out.coverage;
  out.sample = std::move(s);
  return out;
}

inline std::optional<GroundTruthSample> filter_sample(const LabelMap& labels, const DepthMap& depth,
                                                      std::span<const Plane> camera_planes, const Frame& frame,
                                                      const FilterConfig& cfg = {}) {
  return filter_sample_detailed(labels, depth, camera_planes, frame, cfg).sample;
}

/// Rasterise one frame of a fitted mesh and filter it.
inline FilterOutcome process_frame(const SemanticMesh& mesh, const FittedMeshPlanes& fitted, const Frame& frame,
                                   const FilterConfig& cfg = {}) {
  const RasterResult r = rasterize_frame(mesh, fitted, frame);
  std::vector<Plane> cam;
  std::vector<int> remap(fitted.planes.size(), -1);
  // Planes whose camera-frame offset vanishes cannot be seen; drop them first.
  for (std::size_t j = 0; j < fitted.planes.size(); ++j) {
    try {
      cam.push_back(fitted.camera_plane(static_cast<int>(j), frame.pose));
      remap[j] = static_cast<int>(cam.size()) - 1;
    } catch (const DegeneratePlane&) {
    }
  }
  LabelMap labels(r.labels.width(), r.labels.height(), static_cast<int>(cam.size()));
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (r.labels.planar(i) && remap[r.labels[i]] >= 0) labels.set(i, remap[r.labels[i]]);
  }
  return filter_sample_detailed(labels, r.depth, cam, frame, cfg);
}

struct SceneInput {
  std::string name;
  SemanticMesh mesh;
  std::vector<Frame> trajectory;
};

struct DatasetConfig {
  int stride = 10;
  double split = 0.9;  ///< fraction of scenes in the training split
  std::uint64_t rng_seed = 0;
  RansacConfig ransac;
  MergeConfig merge;
  FilterConfig filter;

  void validate() const {
    if (stride < 1) throw InvalidConfig("dataset: stride must be >= 1");
    if (!(split >= 0.0 && split <= 1.0)) throw InvalidConfig("dataset: split must lie in [0, 1]");
    ransac.validate();
    merge.validate();
    filter.validate();
  }
};

struct ManifestEntry {
  std::string scene;
  int frame = 0;
  bool train = true;
  bool accepted = false;
  std::string reason;
  int num_planes = 0;
  double coverage = 0.0;
};

struct DatasetSample {
  std::string scene;
  int frame = 0;
  GroundTruthSample sample;
};

struct Dataset {
  std::vector<DatasetSample> train;
  std::vector<DatasetSample> test;
  std::vector<ManifestEntry> manifest;
  std::vector<std::string> train_scenes;
  std::vector<std::string> test_scenes;
  std::vector<std::size_t> dropped_triangles;  ///< per input scene
};

/// Seeded scene-level split of `n` scenes: returns the training flags.
inline std::vector<bool> split_scenes(std::size_t n, double split, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("build_dataset: at least one scene required");
  const auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) throw EmptySplit("build_dataset: a split would receive no scenes");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0x5911));
  rng.shuffle(idx);
  std::vector<bool> train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) train[idx[i]] = true;
  return train;
}

inline Dataset build_dataset(const std::vector<SceneInput>& scenes, const DatasetConfig& cfg) {
  cfg.validate();
  const auto train = split_scenes(scenes.size(), cfg.split, cfg.rng_seed);
  Dataset out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    (train[s] ? out.train_scenes : out.test_scenes).push_back(scenes[s].name);
    MeshIngest ing = ingest_mesh(scenes[s].mesh);
    out.dropped_triangles.push_back(ing.dropped_triangles);
    RansacConfig rc = cfg.ransac;
    rc.rng_seed = derive_seed(cfg.rng_seed, s + 1);
    FittedMeshPlanes fitted = merge_planes(ing.mesh, fit_semantic_planes(ing.mesh, rc), cfg.merge);
    for (std::size_t f = 0; f < scenes[s].trajectory.size(); f += static_cast<std::size_t>(cfg.stride)) {
      FilterOutcome o = process_frame(ing.mesh, fitted, scenes[s].trajectory[f], cfg.filter);
      ManifestEntry e{scenes[s].name, static_cast<int>(f), train[s], o.sample.has_value(), o.reason,
                      o.sample ? static_cast<int>(o.sample->planes.size()) : 0, o.coverage};
      out.manifest.push_back(e);
      if (o.sample) (train[s] ? out.train : out.test).push_back({scenes[s].name, static_cast<int>(f), std::move(*o.sample)});
    }
  }
  return out;
}

}  // namespace planekit

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "planekit/gt_pipeline.hpp"
#include "planekit/synth.hpp"

namespace planekit {
namespace {

double rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Square grid patch of (n+1)^2 vertices centred at c, spanned by unit a and b
/// with half-size h, triangulated, all vertices carrying `label`.
void add_patch(SemanticMesh& m, const Vec3& c, const Vec3& a, const Vec3& b, double h, int n, int label) {
  const int base = static_cast<int>(m.vertices.size());
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      m.vertices.push_back(c + (-h + 2 * h * i / n) * a + (-h + 2 * h * j / n) * b);
      m.vertex_labels.push_back(label);
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = base + j * (n + 1) + i, v10 = v00 + 1, v01 = v00 + n + 1, v11 = v01 + 1;
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }
  }
}

/// Fit with one hand-made plane per label and every vertex assigned to it.
FittedMeshPlanes manual_fit(const SemanticMesh& m, const std::vector<Plane>& planes) {
  FittedMeshPlanes f;
  f.planes = planes;
  for (std::size_t j = 0; j < planes.size(); ++j) f.plane_labels.push_back({static_cast<int>(j)});
  for (int l : m.vertex_labels) f.vertex_assignment.push_back(l);
  return f;
}

SceneSpec box_room() {
  SceneSpec s;
  s.camera_position = {2.0, 1.0, 1.4};
  return s;
}

std::array<Plane, 6> world_face_planes(const SceneSpec& s, const Vec3& anchor) {
  // Faces relative to the anchor: floor, ceiling, x=0, x=L, y=0, y=L.
  std::array<Plane, 6> out{Plane::from_param({0, 0, 1}), Plane::from_param({0, 0, 1}), Plane::from_param({0, 0, 1}),
                           Plane::from_param({0, 0, 1}), Plane::from_param({0, 0, 1}), Plane::from_param({0, 0, 1})};
  const int axis[6] = {2, 2, 0, 0, 1, 1};
  for (int f = 0; f < 6; ++f) {
    const double c = f % 2 == 0 ? 0.0 : s.room_size(axis[f]);
    out[f] = Plane::from_signed(Vec3::Unit(axis[f]), c - anchor(axis[f]));
  }
  return out;
}

TEST(FitSemanticPlanes, BoxRoomGivesOnePlanePerFace) {
  const SceneSpec s = box_room();
  const SemanticMesh mesh = emit_mesh(s, 6);
  const FittedMeshPlanes f = fit_semantic_planes(mesh, {});
  ASSERT_EQ(f.planes.size(), 6u);
  EXPECT_TRUE(f.unplaned_labels.empty());
  const auto faces = world_face_planes(s, f.anchor);
  for (int j = 0; j < 6; ++j) {
    ASSERT_EQ(f.plane_labels[j], std::vector<int>{j});
    EXPECT_LT(normal_angle_deg(f.planes[j].normal(), faces[j].normal()), 0.5);
    EXPECT_NEAR((f.planes[j].param() - faces[j].param()).norm(), 0.0, 1e-6);
  }
  for (int a : f.vertex_assignment) EXPECT_GE(a, 0);
}

TEST(FitSemanticPlanes, SingleLabelSinglePlane) {
  SemanticMesh m;
  add_patch(m, {0, 0, 3}, {1, 0, 0}, {0, 1, 0}, 1.0, 8, 4);
  const FittedMeshPlanes f = fit_semantic_planes(m, {});
  ASSERT_EQ(f.planes.size(), 1u);
  EXPECT_EQ(f.plane_labels[0], std::vector<int>{4});
}

TEST(FitSemanticPlanes, SphereLeavesResidualsWithinThreshold) {
  SemanticMesh m;
  const int nl = 30, nv = 60;
  for (int i = 0; i <= nl; ++i) {
    const double th = std::numbers::pi * i / nl;
    for (int j = 0; j < nv; ++j) {
      const double ph = 2 * std::numbers::pi * j / nv;
      m.vertices.emplace_back(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), 3.0 + std::cos(th));
      m.vertex_labels.push_back(0);
    }
  }
  for (int i = 0; i < nl; ++i) {
    for (int j = 0; j < nv; ++j) {
      const int a = i * nv + j, b = i * nv + (j + 1) % nv, c = a + nv, d = b + nv;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
  }
  const FittedMeshPlanes f = fit_semantic_planes(m, {});
  EXPECT_GT(f.planes.size(), 3u);
  std::size_t unassigned = 0;
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const int a = f.vertex_assignment[i];
    if (a < 0) {
      ++unassigned;
      for (std::size_t j = 0; j < f.planes.size(); ++j) EXPECT_GT(f.distance(static_cast<int>(j), m.vertices[i]), 0.05);
    } else {
      EXPECT_LE(f.distance(a, m.vertices[i]), 0.05);
    }
  }
  EXPECT_GT(unassigned, 0u);
}

TEST(FitSemanticPlanes, TinyLabelIsUnplaned) {
  SemanticMesh m;
  add_patch(m, {0, 0, 3}, {1, 0, 0}, {0, 1, 0}, 1.0, 8, 0);
  add_patch(m, {0, 0, 5}, {1, 0, 0}, {0, 1, 0}, 0.1, 2, 1);  // 9 vertices < min_inliers
  const FittedMeshPlanes f = fit_semantic_planes(m, {});
  EXPECT_EQ(f.planes.size(), 1u);
  EXPECT_EQ(f.unplaned_labels, std::vector<int>{1});
}

TEST(IngestMesh, DropsMixedLabelTriangles) {
  SemanticMesh m;
  m.vertices = {{0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  m.vertex_labels = {0, 0, 0, 1};
  m.triangles = {{0, 1, 2}, {1, 3, 2}};
  const MeshIngest r = ingest_mesh(m);
  EXPECT_EQ(r.dropped_triangles, 1u);
  EXPECT_EQ(r.mesh.triangles.size(), 1u);
  m.triangles.push_back({0, 1, 7});
  EXPECT_THROW(ingest_mesh(m), BadFormat);
}

TEST(MergePlanes, CoplanarPatchesFromDifferentLabels) {
  SemanticMesh m;
  add_patch(m, {-1, 0, 2}, {1, 0, 0}, {0, 1, 0}, 0.5, 6, 0);
  add_patch(m, {1, 0, 2}, {1, 0, 0}, {0, 1, 0}, 0.4, 6, 1);
  const FittedMeshPlanes fit = fit_semantic_planes(m, {});
  ASSERT_EQ(fit.planes.size(), 2u);
  const FittedMeshPlanes merged = merge_planes(m, fit, {});
  ASSERT_EQ(merged.planes.size(), 1u);
  EXPECT_EQ(merged.plane_labels[0], (std::vector<int>{0, 1}));
  for (int a : merged.vertex_assignment) EXPECT_EQ(a, 0);
}

/// Large patch A on z = 2 (label 0) and small patch B (label 1) centred at
/// height 2 + offset, tilted by `tilt` degrees about x.
struct MergePair {
  SemanticMesh mesh;
  FittedMeshPlanes fit;
};

MergePair merge_pair(double tilt_deg, double offset, double half = 0.05) {
  MergePair p;
  add_patch(p.mesh, {0, 0, 2}, {1, 0, 0}, {0, 1, 0}, 1.0, 10, 0);
  const Vec3 nb = Eigen::AngleAxisd(rad(tilt_deg), Vec3::UnitX()) * Vec3::UnitZ();
  const Vec3 cb(3, 0, 2 + offset);
  add_patch(p.mesh, cb, {1, 0, 0}, nb.cross(Vec3::UnitX()), half, 4, 1);
  p.fit = manual_fit(p.mesh, {Plane::from_normal_offset({0, 0, 1}, 2.0), Plane::from_signed(nb, nb.dot(cb))});
  return p;
}

std::optional<double> predicate(const MergePair& p, const MergeConfig& cfg = {}) {
  return merge_predicate(p.fit, p.mesh, 0, 1, cfg, detail::plane_members(p.fit));
}

TEST(MergePredicate, TenDegreesTwoCentimetresMerges) {
  const MergePair p = merge_pair(10.0, 0.02);
  const auto d = predicate(p);
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 0.02, 1e-12);
  EXPECT_EQ(merge_planes(p.mesh, p.fit, {}).planes.size(), 1u);
}

TEST(MergePredicate, TwentyFiveDegreesDoesNotMerge) {
  const MergePair p = merge_pair(25.0, 0.02);
  EXPECT_FALSE(predicate(p));
  EXPECT_EQ(merge_planes(p.mesh, p.fit, {}).planes.size(), 2u);
}

TEST(MergePredicate, AngleBoundaryAtTwentyDegrees) {
  EXPECT_TRUE(predicate(merge_pair(19.9, 0.0)));
  EXPECT_FALSE(predicate(merge_pair(20.1, 0.0)));
}

TEST(MergePredicate, DistanceBoundaryAtFiveCentimetres) {
  EXPECT_TRUE(predicate(merge_pair(0.0, 0.049)));
  EXPECT_FALSE(predicate(merge_pair(0.0, 0.051)));
}

TEST(MergePredicate, DistanceIsMeasuredFromSmallerPlane) {
  // B's vertices are 2 cm off A; A's vertices are far from B's tilted plane.
  const MergePair p = merge_pair(10.0, 0.02);
  MergeConfig sym;
  sym.symmetric_distance = true;
  EXPECT_TRUE(predicate(p));
  EXPECT_FALSE(predicate(p, sym));
}

TEST(MergePredicate, SameLabelNeverMerges) {
  MergePair p = merge_pair(0.0, 0.0);
  p.fit.plane_labels[1] = {0};
  EXPECT_FALSE(predicate(p));
}

TEST(MergePlanes, SinglePlaneUnchanged) {
  SemanticMesh m;
  add_patch(m, {0, 0, 2}, {1, 0, 0}, {0, 1, 0}, 1.0, 6, 0);
  const FittedMeshPlanes f = fit_semantic_planes(m, {});
  const FittedMeshPlanes g = merge_planes(m, f, {});
  ASSERT_EQ(g.planes.size(), 1u);
  EXPECT_EQ(g.planes[0], f.planes[0]);
  EXPECT_EQ(g.vertex_assignment, f.vertex_assignment);
}

TEST(MergePlanes, OutputIsAFixedPoint) {
  // Several patches spread over three parallel heights with small tilts.
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    SemanticMesh m;
    for (int l = 0; l < 8; ++l) {
      const double tilt = rng.uniform(-15, 15);
      const Vec3 n = Eigen::AngleAxisd(rad(tilt), Vec3::UnitX()) * Vec3::UnitZ();
      const Vec3 c(rng.uniform(-3, 3), rng.uniform(-3, 3), 2.0 + 0.3 * static_cast<double>(rng.index(3)));
      add_patch(m, c, Vec3::UnitX(), n.cross(Vec3::UnitX()), rng.uniform(0.2, 0.6), 6, l);
    }
    const FittedMeshPlanes f = fit_semantic_planes(m, {});
    const FittedMeshPlanes g = merge_planes(m, f, {});
    EXPECT_LE(g.planes.size(), f.planes.size());
    const auto members = detail::plane_members(g);
    for (int i = 0; i < static_cast<int>(g.planes.size()); ++i) {
      for (int j = i + 1; j < static_cast<int>(g.planes.size()); ++j) {
        EXPECT_FALSE(merge_predicate(g, m, i, j, {}, members));
      }
    }
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      if (g.vertex_assignment[v] >= 0) { EXPECT_LE(g.distance(g.vertex_assignment[v], m.vertices[v]), 0.05); }
    }
    // Every label is spanned by exactly one output plane per input plane.
    std::size_t spanned = 0;
    for (const auto& l : g.plane_labels) spanned += l.size();
    EXPECT_EQ(spanned, f.plane_labels.size());
  }
}

Frame identity_frame(int w = 64, int h = 48) {
  Frame fr;
  fr.intrinsics = {100, 100, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
  return fr;
}

TEST(RasterizeFrame, FrontalSquareFillsLeftHalf) {
  SemanticMesh m;
  m.vertices = {{-2, -2, 2}, {0, -2, 2}, {0, 2, 2}, {-2, 2, 2}};
  m.vertex_labels = {0, 0, 0, 0};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  const FittedMeshPlanes f = manual_fit(m, {Plane::from_param({0, 0, 2})});
  const Frame fr = identity_frame();
  const RasterResult r = rasterize_frame(m, f, fr);
  for (int v = 0; v < 48; ++v) {
    for (int u = 0; u < 64; ++u) {
      const bool left = u <= 31;  // x = 0 projects to u = 31.5
      EXPECT_EQ(r.labels.at(u, v), left ? 0 : 1) << u << "," << v;
      EXPECT_EQ(r.depth.valid(u, v), left);
      if (left) { EXPECT_NEAR(r.depth.depth(u, v), 2.0, 1e-6); }
    }
  }
}

TEST(RasterizeFrame, TriangleBehindCameraWritesNothing) {
  SemanticMesh m;
  m.vertices = {{-1, -1, -1}, {1, -1, -1}, {0, 1, -1}};
  m.vertex_labels = {0, 0, 0};
  m.triangles = {{0, 1, 2}};
  const FittedMeshPlanes f = manual_fit(m, {Plane::from_param({0, 0, -1})});
  const RasterResult r = rasterize_frame(m, f, identity_frame());
  EXPECT_EQ(r.depth.valid_count(), 0u);
}

TEST(RasterizeFrame, NearestSurfaceWins) {
  SemanticMesh m;
  add_patch(m, {0, 0, 3}, {1, 0, 0}, {0, 1, 0}, 3.0, 2, 0);
  add_patch(m, {0, 0, 2}, {1, 0, 0}, {0, 1, 0}, 0.2, 2, 1);
  const FittedMeshPlanes f = manual_fit(m, {Plane::from_param({0, 0, 3}), Plane::from_param({0, 0, 2})});
  const RasterResult r = rasterize_frame(m, f, identity_frame());
  const CameraIntrinsics& k = identity_frame().intrinsics;
  for (int v = 0; v < 48; ++v) {
    for (int u = 0; u < 64; ++u) {
      const double x = (u - k.cx) / k.fx * 2.0, y = (v - k.cy) / k.fy * 2.0;
      const bool inner = std::abs(x) < 0.199 && std::abs(y) < 0.199;
      const bool outer = std::abs(x) > 0.201 || std::abs(y) > 0.201;
      if (inner) { EXPECT_EQ(r.labels.at(u, v), 1); }
      if (outer) { EXPECT_EQ(r.labels.at(u, v), 0); }
    }
  }
}

TEST(RasterizeFrame, SharedEdgesLeaveNoHoles) {
  SemanticMesh m;
  add_patch(m, {0.1, -0.05, 2}, {1, 0, 0}, Vec3(0, 1, 0.3).normalized(), 1.5, 7, 0);
  const FittedMeshPlanes f = fit_semantic_planes(m, {});
  const RasterResult r = rasterize_frame(m, f, identity_frame());
  EXPECT_EQ(r.depth.valid_count(), r.depth.pixels());
  const Plane cam = f.camera_plane(0, Pose{});
  for (int v = 0; v < 48; ++v) {
    for (int u = 0; u < 64; ++u) {
      EXPECT_NEAR(r.depth.depth(u, v), *plane_depth(cam, u, v, identity_frame().intrinsics), 1e-6);
    }
  }
}

TEST(RasterizeFrame, InconsistentTrianglesOccludeUnlabelled) {
  SemanticMesh m;
  add_patch(m, {0, 0, 3}, {1, 0, 0}, {0, 1, 0}, 3.0, 2, 0);
  add_patch(m, {0, 0, 2}, {1, 0, 0}, {0, 1, 0}, 0.2, 2, 1);
  FittedMeshPlanes f = manual_fit(m, {Plane::from_param({0, 0, 3}), Plane::from_param({0, 0, 2})});
  for (std::size_t i = 9; i < m.vertices.size(); ++i) f.vertex_assignment[i] = -1;
  const RasterResult r = rasterize_frame(m, f, identity_frame());
  EXPECT_GT(r.occluding_triangles, 0u);
  EXPECT_EQ(r.labels.at(31, 23), 2);
  EXPECT_NEAR(r.depth.depth(31, 23), 2.0, 1e-9);
}

/// 100x100 frame with planes covering the given pixel counts (row-major runs).
struct FilterCase {
  LabelMap labels;
  DepthMap depth;
  std::vector<Plane> planes;
  Frame frame;
};

FilterCase filter_case(const std::vector<int>& counts) {
  FilterCase c;
  c.frame.intrinsics = {80, 80, 49.5, 49.5, 100, 100};
  const int K = static_cast<int>(counts.size());
  c.labels = LabelMap(100, 100, K);
  c.depth = DepthMap(100, 100);
  for (int j = 0; j < K; ++j) c.planes.push_back(Plane::from_param({0.1 * j, 0, 2.0 + j}));
  std::size_t i = 0;
  for (int j = 0; j < K; ++j) {
    for (int n = 0; n < counts[j]; ++n, ++i) c.labels.set(i, j);
  }
  for (std::size_t p = 0; p < c.depth.pixels(); ++p) c.depth.set(p, 4.0);
  return c;
}

FilterOutcome run_filter(const FilterCase& c, const FilterConfig& cfg = {}) {
  return filter_sample_detailed(c.labels, c.depth, c.planes, c.frame, cfg);
}

TEST(FilterSample, CoverageBoundaryAtHalf) {
  EXPECT_FALSE(run_filter(filter_case({4900})).sample);
  EXPECT_EQ(run_filter(filter_case({4900})).reason, "planar coverage below the minimum");
  EXPECT_TRUE(run_filter(filter_case({5100})).sample);
  EXPECT_TRUE(run_filter(filter_case({5000})).sample);
}

TEST(FilterSample, SmallPlaneBoundaryAtOnePercent) {
  auto o = run_filter(filter_case({6000, 50}));
  ASSERT_TRUE(o.sample);
  EXPECT_EQ(o.sample->planes.size(), 1u);
  EXPECT_EQ(o.dropped_small, 1u);
  EXPECT_EQ(run_filter(filter_case({6000, 99})).sample->planes.size(), 1u);
  EXPECT_EQ(run_filter(filter_case({6000, 100})).sample->planes.size(), 2u);
  EXPECT_EQ(run_filter(filter_case({6000, 101})).sample->planes.size(), 2u);
}

TEST(FilterSample, DroppedPlanePixelsBecomeUnlabelledAndCountAgainstCoverage) {
  const auto o = run_filter(filter_case({4950, 90}));
  EXPECT_FALSE(o.sample);
  EXPECT_NEAR(o.coverage, 0.495, 1e-12);
}

TEST(FilterSample, CapKeepsLargestPlanes) {
  std::vector<int> counts;
  for (int j = 0; j < 12; ++j) counts.push_back(500 + 10 * j);
  const auto o = run_filter(filter_case(counts));
  ASSERT_TRUE(o.sample);
  EXPECT_EQ(o.sample->planes.size(), 10u);
  EXPECT_EQ(o.dropped_cap, 2u);
  // Re-indexed by descending area: plane 11 (largest) comes first.
  EXPECT_EQ(o.sample->planes.planes[0], filter_case(counts).planes[11]);
  const auto areas = o.sample->labels.areas();
  for (std::size_t j = 1; j < areas.size(); ++j) EXPECT_GE(areas[j - 1], areas[j]);
}

TEST(FilterSample, LabelledDepthEqualsPlaneDepth) {
  const FilterCase c = filter_case({3000, 2500, 900});
  const auto o = run_filter(c);
  ASSERT_TRUE(o.sample);
  const auto& s = *o.sample;
  for (int v = 0; v < 100; ++v) {
    for (int u = 0; u < 100; ++u) {
      const int l = s.labels.at(u, v);
      if (l < s.labels.num_planes()) {
        EXPECT_LE(std::abs(s.depth.depth(u, v) - *plane_depth(s.planes.planes[l], u, v, c.frame.intrinsics)), 1e-6);
      }
    }
  }
}

TEST(FilterSample, OutputInvariantsOnRandomInputs) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> counts;
    int left = 10000;
    const int K = 1 + static_cast<int>(rng.index(14));
    for (int j = 0; j < K && left > 0; ++j) {
      const int n = std::min(left, static_cast<int>(rng.index(2500)));
      counts.push_back(n);
      left -= n;
    }
    FilterConfig cfg;
    cfg.min_plane_area = rng.uniform(0, 0.05);
    cfg.min_frame_coverage = rng.uniform(0, 0.9);
    cfg.k_max = 1 + static_cast<int>(rng.index(10));
    const auto o = run_filter(filter_case(counts), cfg);
    if (!o.sample) continue;
    const auto areas = o.sample->labels.areas();
    EXPECT_LE(static_cast<int>(o.sample->planes.size()), cfg.k_max);
    std::size_t covered = 0;
    for (auto a : areas) {
      EXPECT_GE(a / 10000.0, cfg.min_plane_area);
      covered += a;
    }
    EXPECT_GE(covered / 10000.0, cfg.min_frame_coverage);
  }
}

TEST(ProcessFrame, CleanBoxRoomShowsFivePlanes) {
  const SceneSpec s = box_room();
  const SemanticMesh mesh = emit_mesh(s, 6);
  const FittedMeshPlanes f = merge_planes(mesh, fit_semantic_planes(mesh, {}), {});
  const FilterOutcome o = process_frame(mesh, f, {s.intrinsics, s.pose()});
  ASSERT_TRUE(o.sample);
  EXPECT_EQ(o.sample->planes.size(), 5u);
  EXPECT_NEAR(o.coverage, 1.0, 1e-12);
  // Oracle: the analytic renderer's visible room faces.
  const SceneRender r = render_scene(s);
  EXPECT_EQ(r.planes.size(), 5u);
}

/// Recovered planes and labels against the analytic renderer.
void expect_matches_renderer(const SceneSpec& s) {
  const SemanticMesh mesh = emit_mesh(s, 6);
  const FittedMeshPlanes f = merge_planes(mesh, fit_semantic_planes(mesh, {}), {});
  const Frame frame{s.intrinsics, s.pose()};
  const FilterOutcome o = process_frame(mesh, f, frame);
  ASSERT_TRUE(o.sample);
  const GroundTruthSample& gt = *o.sample;

  const SceneRender r = render_scene(s);
  const auto ref = filter_sample(r.labels, r.depth, r.planes.planes, frame);
  ASSERT_TRUE(ref);
  ASSERT_EQ(gt.planes.size(), ref->planes.size());
  std::vector<int> to_ref(gt.planes.size(), -1);
  for (std::size_t j = 0; j < gt.planes.size(); ++j) {
    for (std::size_t q = 0; q < ref->planes.size(); ++q) {
      const Plane& a = gt.planes.planes[j];
      const Plane& b = ref->planes.planes[q];
      if (normal_angle_deg(a.normal(), b.normal()) < 0.5 && std::abs(a.offset() - b.offset()) < 1e-3) to_ref[j] = static_cast<int>(q);
    }
    EXPECT_GE(to_ref[j], 0) << "plane " << j;
  }
  const int W = s.intrinsics.width, H = s.intrinsics.height;
  const auto edge = oracle::boundary_pixels(ref->labels.data(), W, H);
  std::size_t total = 0, agree = 0;
  for (std::size_t i = 0; i < ref->labels.pixels(); ++i) {
    if (edge[i]) continue;
    ++total;
    const int l = gt.labels[i];
    const int mapped = l < gt.labels.num_planes() ? to_ref[l] : ref->labels.num_planes();
    agree += mapped == ref->labels[i];
  }
  EXPECT_GE(static_cast<double>(agree), 0.99 * total);
}

TEST(Pipeline, RecoversAnalyticRoomsFromMeshes) {
  RandomSceneOptions opt;
  opt.max_cuboids = 0;
  opt.intrinsics = {110, 110, 63.5, 47.5, 128, 96};
  for (std::uint64_t seed : {1u, 2u, 3u}) expect_matches_renderer(random_scene(seed, opt));
}

TEST(SplitScenes, NinetyPercentOfTen) {
  const auto t = split_scenes(10, 0.9, 3);
  EXPECT_EQ(std::count(t.begin(), t.end(), true), 9);
  EXPECT_EQ(split_scenes(10, 0.9, 3), t);
  EXPECT_THROW(split_scenes(1, 0.9, 3), EmptySplit);
  EXPECT_THROW(split_scenes(5, 1.0, 3), EmptySplit);
}

std::vector<SceneInput> small_scenes(int n, int frames) {
  std::vector<SceneInput> out;
  RandomSceneOptions opt;
  opt.max_cuboids = 0;
  opt.intrinsics = {55, 55, 31.5, 23.5, 64, 48};
  for (int i = 0; i < n; ++i) {
    const SceneSpec s = random_scene(100 + i, opt);
    SceneInput in{"scene" + std::to_string(i), emit_mesh(s, 5), {}};
    for (int f = 0; f < frames; ++f) {
      SceneSpec t = s;
      t.yaw_deg += 0.5 * f;
      in.trajectory.push_back({t.intrinsics, t.pose()});
    }
    out.push_back(std::move(in));
  }
  return out;
}

TEST(BuildDataset, SceneSplitStrideAndDeterminism) {
  const auto scenes = small_scenes(10, 25);
  DatasetConfig cfg;
  cfg.rng_seed = 9;
  const Dataset a = build_dataset(scenes, cfg);
  EXPECT_EQ(a.train_scenes.size(), 9u);
  EXPECT_EQ(a.test_scenes.size(), 1u);
  ASSERT_EQ(a.manifest.size(), 30u);
  for (std::size_t i = 0; i < a.manifest.size(); ++i) EXPECT_EQ(a.manifest[i].frame, static_cast<int>(10 * (i % 3)));
  for (const auto& e : a.manifest) {
    const bool in_train = std::find(a.train_scenes.begin(), a.train_scenes.end(), e.scene) != a.train_scenes.end();
    EXPECT_EQ(e.train, in_train);
    EXPECT_EQ(e.accepted, e.reason.empty());
  }
  const Dataset b = build_dataset(scenes, cfg);
  ASSERT_EQ(b.manifest.size(), a.manifest.size());
  for (std::size_t i = 0; i < a.manifest.size(); ++i) {
    EXPECT_EQ(a.manifest[i].scene, b.manifest[i].scene);
    EXPECT_EQ(a.manifest[i].accepted, b.manifest[i].accepted);
    EXPECT_EQ(a.manifest[i].coverage, b.manifest[i].coverage);
    EXPECT_EQ(a.manifest[i].num_planes, b.manifest[i].num_planes);
  }
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].sample.labels, b.train[i].sample.labels);
}

TEST(BuildDataset, SingleSceneIsAnEmptySplit) {
  EXPECT_THROW(build_dataset(small_scenes(1, 1), {}), EmptySplit);
}

}  // namespace
}  // namespace planekit

#include <gtest/gtest.h>

#include <vector>

#include "oracles.hpp"
#include "planekit/layout.hpp"
#include "planekit/synth.hpp"

namespace planekit {
namespace {

const CameraIntrinsics kCam{100, 100, 63.5, 47.5, 128, 120};

RoleAssignment assign(std::initializer_list<std::pair<Role, std::size_t>> pairs) {
  RoleAssignment r;
  for (const auto& [role, j] : pairs) r[role] = j;
  return r;
}

ProbMaskStack masks_from_labels(const LabelMap& labels) {
  return ProbMaskStack::one_hot(labels, labels.num_planes() + 1);
}

TEST(LayoutCatalog, ValidConfigurations) {
  EXPECT_TRUE(is_valid_configuration(LayoutConfiguration::of({Role::wall_middle})));
  EXPECT_TRUE(is_valid_configuration(LayoutConfiguration::of({Role::floor, Role::wall_left})));
  EXPECT_FALSE(is_valid_configuration(LayoutConfiguration::of({Role::wall_left})));
  EXPECT_FALSE(is_valid_configuration(LayoutConfiguration::of({Role::floor, Role::wall_left, Role::wall_right})));
  EXPECT_FALSE(is_valid_configuration(LayoutConfiguration{}));
  const auto& cat = layout_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i) {
    EXPECT_TRUE(is_valid_configuration(cat[i]));
    if (i > 0) { EXPECT_LE(cat[i - 1].count(), cat[i].count()); }
  }
  // Brute-force count of the family over all 31 non-empty subsets.
  int expected = 0;
  for (unsigned m = 1; m < 32; ++m) {
    const LayoutConfiguration c{m};
    const bool anchor = c.has(Role::floor) || c.has(Role::ceiling) || c.has(Role::wall_middle);
    const bool gap = c.has(Role::wall_left) && c.has(Role::wall_right) && !c.has(Role::wall_middle);
    expected += anchor && !gap;
  }
  EXPECT_EQ(static_cast<int>(cat.size()), expected);
}

TEST(ProjectLayout, FrontalWallCoversImage) {
  const std::vector<Plane> planes{Plane::from_param({0, 0, 3})};
  const LabelMap l = project_layout(planes, assign({{Role::wall_middle, 0}}),
                                    LayoutConfiguration::of({Role::wall_middle}), kCam);
  for (std::size_t i = 0; i < l.pixels(); ++i) EXPECT_EQ(l[i], static_cast<int>(Role::wall_middle));
}

TEST(ProjectLayout, FloorMeetsWallAtAnalyticRow) {
  const std::vector<Plane> planes{Plane::from_param({0, 1.5, 0}), Plane::from_param({0, 0, 3})};
  const LabelMap l = project_layout(planes, assign({{Role::floor, 0}, {Role::wall_middle, 1}}),
                                    LayoutConfiguration::of({Role::floor, Role::wall_middle}), kCam);
  const double boundary = kCam.cy + kCam.fy / 2.0;
  for (int v = 0; v < kCam.height; ++v) {
    for (int u = 0; u < kCam.width; ++u) {
      // per-pixel minimum of the two analytic depths
      const double y = (v - kCam.cy) / kCam.fy;
      const double floor_z = y > 0 ? 1.5 / y : 1e300;
      const Role want = floor_z < 3.0 ? Role::floor : Role::wall_middle;
      EXPECT_EQ(l.at(u, v), static_cast<int>(want));
      EXPECT_EQ(want == Role::floor, v > boundary);
    }
  }
}

TEST(ProjectLayout, MissingPlaneIsInvalidConfig) {
  const std::vector<Plane> planes{Plane::from_param({0, 0, 3})};
  EXPECT_THROW(project_layout(planes, assign({{Role::wall_middle, 0}}),
                              LayoutConfiguration::of({Role::floor, Role::wall_middle}), kCam),
               InvalidConfig);
  EXPECT_THROW(project_layout(planes, assign({{Role::wall_left, 0}}), LayoutConfiguration::of({Role::wall_left}), kCam),
               InvalidConfig);
}

struct RoomCase {
  SceneRender render;
  std::vector<Plane> planes;
  RoleAssignment roles;
};

/// Room planes for all five roles straight from the scene geometry.
RoomCase room_case(const SceneSpec& spec) {
  RoomCase c{render_scene(spec), {}, {}};
  const auto rp = room_role_planes(spec);
  for (int r = 0; r < kNumRoles; ++r) {
    if (!rp[r]) continue;
    c.roles.plane[r] = c.planes.size();
    c.planes.push_back(*rp[r]);
  }
  return c;
}

TEST(ProjectLayout, BoxRoomMatchesRenderer) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RandomSceneOptions opt;
    opt.intrinsics = kCam;
    opt.max_cuboids = 2;
    const SceneSpec spec = random_scene(seed, opt);
    const RoomCase c = room_case(spec);
    const LabelMap l = project_layout(c.planes, c.roles, c.render.visible_roles, kCam);
    EXPECT_EQ(layout_pixel_error(l, c.render.roles), 0.0) << "seed " << seed;
  }
}

TEST(ProjectLayout, SelectedRoleHasMinimalDepth) {
  const SceneSpec spec = random_scene(9, {0, 0, kCam});
  const RoomCase c = room_case(spec);
  const auto config = c.render.visible_roles;
  const LabelMap l = project_layout(c.planes, c.roles, config, kCam);
  for (int v = 0; v < kCam.height; ++v) {
    for (int u = 0; u < kCam.width; ++u) {
      const int got = l.at(u, v);
      ASSERT_GE(got, 0);
      ASSERT_LT(got, kNumRoles);
      ASSERT_TRUE(config.has(static_cast<Role>(got)));
      const auto zg = oracle::ray_plane_z(c.planes[*c.roles.plane[got]].normal(),
                                          c.planes[*c.roles.plane[got]].offset(), u, v, kCam);
      ASSERT_TRUE(zg.has_value());
      for (int r = 0; r < kNumRoles; ++r) {
        if (!config.has(static_cast<Role>(r))) continue;
        const Plane& p = c.planes[*c.roles.plane[r]];
        if (auto z = oracle::ray_plane_z(p.normal(), p.offset(), u, v, kCam)) { EXPECT_LE(*zg, *z + 1e-9); }
      }
    }
  }
}

TEST(ProjectLayout, OffsetScalingInvariance) {
  const SceneSpec spec = random_scene(4, {0, 0, kCam});
  const RoomCase c = room_case(spec);
  const LabelMap base = project_layout(c.planes, c.roles, c.render.visible_roles, kCam);
  for (double s : {0.3, 2.0, 17.0}) {
    std::vector<Plane> scaled;
    for (const auto& p : c.planes) scaled.push_back(p.scaled(s));
    EXPECT_EQ(project_layout(scaled, c.roles, c.render.visible_roles, kCam), base);
  }
}

/// Independent recount of the score of one configuration.
std::size_t recount(const std::vector<Plane>& planes, const RoleAssignment& roles, const ProbMaskStack& masks,
                    LayoutConfiguration config) {
  const LabelMap layout = project_layout(planes, roles, config, kCam);
  std::size_t n = 0;
  for (std::size_t i = 0; i < masks.pixels(); ++i) {
    int best = 0;
    for (int c = 1; c < masks.channels(); ++c) {
      if (masks(i, c) > masks(i, best)) best = c;
    }
    const auto role = best < masks.channels() - 1 ? roles.role_of(static_cast<std::size_t>(best)) : std::nullopt;
    n += role && static_cast<int>(*role) == layout[i];
  }
  return n;
}

TEST(EstimateLayout, CleanRoomsRecoverGeneratingConfiguration) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const SceneSpec spec = random_scene(seed, {0, 0, kCam});
    const SceneRender r = render_scene(spec);
    const LayoutResult res = estimate_layout(r.planes.planes, r.role_planes, masks_from_labels(r.labels), kCam);
    EXPECT_EQ(res.configuration, r.visible_roles) << res.configuration.name() << " vs " << r.visible_roles.name();
    EXPECT_EQ(layout_pixel_error(res.roles, r.roles), 0.0);
    EXPECT_EQ(res.score, r.labels.pixels());
    EXPECT_EQ(res.score, recount(r.planes.planes, r.role_planes, masks_from_labels(r.labels), res.configuration));
  }
}

TEST(EstimateLayout, ClutterOnSeventyPercent) {
  const SceneSpec spec = random_scene(3, {0, 0, kCam});
  const SceneRender r = render_scene(spec);
  // Extra non-role plane taking 70% of the pixels.
  std::vector<Plane> planes = r.planes.planes;
  const std::size_t clutter = planes.size();
  planes.push_back(Plane::from_param({0.1, 0.2, 1.0}));
  LabelMap labels(kCam.width, kCam.height, static_cast<int>(planes.size()));
  Rng rng(5);
  std::size_t clean = 0;
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (rng.uniform() < 0.7) {
      labels.set(i, static_cast<int>(clutter));
    } else {
      labels.set(i, r.labels[i]);
      ++clean;
    }
  }
  const ProbMaskStack masks = masks_from_labels(labels);
  const LayoutResult res = estimate_layout(planes, r.role_planes, masks, kCam);
  // Exhaustive scoring over the catalog with the fewer-roles tie rule.
  std::size_t best = 0;
  LayoutConfiguration want;
  bool first = true;
  for (const auto& config : layout_catalog()) {
    bool feasible = true;
    for (int k = 0; k < kNumRoles; ++k) feasible &= !config.has(static_cast<Role>(k)) || r.role_planes.plane[k];
    if (!feasible) continue;
    const std::size_t s = recount(planes, r.role_planes, masks, config);
    if (first || s > best) {
      best = s;
      want = config;
      first = false;
    }
  }
  EXPECT_EQ(res.configuration, want);
  EXPECT_EQ(res.score, best);
  EXPECT_EQ(res.configuration, r.visible_roles);
  EXPECT_EQ(res.score, clean);
}

TEST(EstimateLayout, SingleWallMasksPickSingleWall) {
  const std::vector<Plane> planes{Plane::from_param({0, 1.5, 0}), Plane::from_param({0, 0, 3})};
  LabelMap labels(kCam.width, kCam.height, 2);
  for (std::size_t i = 0; i < labels.pixels(); ++i) labels.set(i, 1);
  const LayoutResult res =
      estimate_layout(planes, assign({{Role::floor, 0}, {Role::wall_middle, 1}}), masks_from_labels(labels), kCam);
  EXPECT_EQ(res.configuration, LayoutConfiguration::of({Role::wall_middle}));
  EXPECT_EQ(res.score, labels.pixels());
}

TEST(LayoutPixelError, Examples) {
  LabelMap a(10, 10, kNumRoles), b(10, 10, kNumRoles), c(10, 10, kNumRoles);
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    a.set(i, static_cast<int>(Role::floor));
    b.set(i, static_cast<int>(Role::wall_middle));
    c.set(i, i % 10 == 3 ? static_cast<int>(Role::ceiling) : static_cast<int>(Role::floor));
  }
  EXPECT_EQ(layout_pixel_error(a, a), 0.0);
  EXPECT_EQ(layout_pixel_error(a, b), 1.0);
  EXPECT_NEAR(layout_pixel_error(a, c), 0.10, 1e-15);
  EXPECT_THROW(layout_pixel_error(a, LabelMap(5, 5, kNumRoles)), DimensionMismatch);
}

TEST(ProposeRoles, AxisAlignedRoom) {
  const SceneSpec spec;
  const auto rp = room_role_planes(spec);
  std::vector<Plane> planes;
  for (int r = 0; r < kNumRoles; ++r) planes.push_back(*rp[r]);
  const RoleAssignment got = propose_roles(planes);
  for (int r = 0; r < kNumRoles; ++r) EXPECT_EQ(got.plane[r], std::optional<std::size_t>(r)) << kRoleNames[r];
}

}  // namespace
}  // namespace planekit

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "planekit/geometry.hpp"
#include "planekit/random.hpp"

namespace planekit {
namespace {

CameraIntrinsics unit_camera(int w = 4, int h = 3) { return {1.0, 1.0, 0.0, 0.0, w, h}; }

TEST(PlaneFromNormalOffset, AxisAligned) {
  const Plane p = plane_from_normal_offset({0, 0, 1}, 2.0);
  EXPECT_EQ(p.param(), Vec3(0, 0, 2));
}

TEST(PlaneFromNormalOffset, BelowMinimumOffsetIsDegenerate) {
  EXPECT_THROW(plane_from_normal_offset({1, 0, 0}, 0.00005), DegeneratePlane);
}

TEST(PlaneFromNormalOffset, DiagonalNormal) {
  const double s = 1.0 / std::sqrt(2.0);
  const Plane p = plane_from_normal_offset({s, 0, s}, std::sqrt(2.0));
  const Vec3 expected = std::sqrt(2.0) * Vec3(s, 0, s);
  EXPECT_NEAR((p.param() - Vec3(1, 0, 1)).norm(), 0.0, 1e-12);
  EXPECT_EQ(p.param(), expected);
  EXPECT_NEAR(p.normal().dot(p.param()), p.offset(), 1e-12);
}

TEST(PlaneFromNormalOffset, NonUnitNormalRejected) {
  EXPECT_THROW(plane_from_normal_offset({0, 0, 2}, 1.0), PreconditionError);
}

TEST(PlaneFromNormalOffset, RoundTripProperty) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double d = rng.uniform(1e-3, 20.0);
    const Plane p = Plane::from_normal_offset(n, d);
    EXPECT_LE((p.normal() - n).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(p.offset(), d, 1e-12);
    const Plane q = Plane::from_param(p.param());
    EXPECT_LE((q.normal() - n).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(q.offset(), d, 1e-12 * d);
  }
}

TEST(PlaneFromSigned, FlippedSignGivesSameParam) {
  const Vec3 n = Vec3(1, 2, -2).normalized();
  const Plane a = Plane::from_signed(n, 3.0);
  const Plane b = Plane::from_signed(-n, -3.0);
  EXPECT_EQ(a.param(), b.param());
  EXPECT_GT(b.offset(), 0.0);
}

TEST(Backproject, PrincipalPoint) {
  const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
  EXPECT_EQ(backproject(320, 240, 3.0, k), Vec3(0, 0, 3));
}

TEST(Backproject, HandFormula) { EXPECT_EQ(backproject(1, 0, 2.0, unit_camera()), Vec3(2, 0, 2)); }

TEST(Backproject, ZeroDepthRejected) { EXPECT_THROW(backproject(1, 0, 0.0, unit_camera()), PreconditionError); }

TEST(PlaneDepth, FrontalPlaneAtPrincipalPoint) {
  const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
  const auto z = plane_depth(Plane::from_param({0, 0, 2}), 320, 240, k);
  ASSERT_TRUE(z);
  EXPECT_EQ(*z, 2.0);
}

TEST(PlaneDepth, SlantedPlane) {
  const auto z = plane_depth(Plane::from_param({1, 0, 1}), 1, 0, unit_camera());
  ASSERT_TRUE(z);
  EXPECT_NEAR(*z, 1.0, 1e-12);
  const Vec3 x = backproject(1, 0, *z, unit_camera());
  EXPECT_NEAR(x.x() + x.z(), 2.0, 1e-12);
}

TEST(PlaneDepth, UnrepresentablePlanes) {
  EXPECT_THROW(Plane::from_param({1e-9, 0, 0}), DegeneratePlane);
  // (0,0,-2) decodes to the plane z = -2 behind the camera: no pixel sees it.
  const Plane behind = Plane::from_param({0, 0, -2});
  EXPECT_EQ(behind.normal(), Vec3(0, 0, -1));
  EXPECT_FALSE(plane_depth(behind, 0, 0, unit_camera()));
}

TEST(PlaneDepth, MatchesRayPlaneOracle) {
  Rng rng(3);
  const CameraIntrinsics k{220, 210, 127.5, 95.5, 256, 192};
  for (int i = 0; i < 2000; ++i) {
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Plane p = Plane::from_normal_offset(n, rng.uniform(0.1, 5));
    const int u = static_cast<int>(rng.index(256)), v = static_cast<int>(rng.index(192));
    const auto got = plane_depth(p, u, v, k);
    const auto want = oracle::ray_plane_z(n, p.offset(), u, v, k);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(*got, *want, 1e-12 * *want);
      EXPECT_NEAR(p.signed_distance(backproject(u, v, *got, k)), 0.0, 1e-9);
    }
  }
}

TEST(RenderPlaneDepthmap, FrontalPlaneMinimumAtPrincipalPoint) {
  const CameraIntrinsics k{50, 50, 5, 4, 11, 9};
  const DepthMap d = render_plane_depthmap(Plane::from_param({0, 0, 2}), k);
  for (int v = 0; v < 9; ++v) {
    for (int u = 0; u < 11; ++u) {
      ASSERT_TRUE(d.valid(u, v));
      const bool centre = (u == 5 && v == 4);
      if (centre) {
        EXPECT_EQ(d.depth(u, v), 2.0);
      } else {
        EXPECT_GE(d.depth(u, v), 2.0);
      }
      EXPECT_EQ(d.depth(u, v), *plane_depth(Plane::from_param({0, 0, 2}), u, v, k));
    }
  }
}

TEST(RenderPlaneDepthmap, FloorIsInvalidAboveHorizon) {
  // Floor 1.5 m below a camera looking at the horizon row: n = +y (down).
  const CameraIntrinsics k{100, 100, 15.5, 10, 32, 21};
  const Plane floor = Plane::from_normal_offset({0, 1, 0}, 1.5);
  const DepthMap d = render_plane_depthmap(floor, k);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      EXPECT_EQ(d.valid(u, v), v > 10) << u << "," << v;
      EXPECT_EQ(d.valid(u, v), floor.normal().dot(k.ray(u, v)) > kMinRayDot);
    }
  }
}

TEST(RenderPlaneDepthmap, SinglePixel) {
  const CameraIntrinsics k{10, 10, 0, 0, 1, 1};
  const DepthMap d = render_plane_depthmap(Plane::from_param({0, 0, 2}), k);
  ASSERT_TRUE(d.valid(0, 0));
  EXPECT_EQ(d.depth(0, 0), 2.0);
}

TEST(RenderPlaneDepthmap, ValidityEqualsRayPredicate) {
  Rng rng(5);
  const CameraIntrinsics k{30, 30, 15, 10, 31, 21};
  for (int i = 0; i < 50; ++i) {
    const Plane p = Plane::from_normal_offset(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized(), 1.0);
    const DepthMap d = render_plane_depthmap(p, k);
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) ASSERT_EQ(d.valid(u, v), p.normal().dot(k.ray(u, v)) > kMinRayDot);
    }
  }
}

TEST(FitPlaneLsq, NoiseFreePlane) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) pts.emplace_back(i * 0.1 - 0.5, j * 0.13 - 0.6, 2.0);
  }
  const PlaneFit f = fit_plane_lsq(pts);
  EXPECT_LE((f.plane.param() - Vec3(0, 0, 2)).norm(), 1e-9);
  EXPECT_LE(f.rms_residual, 1e-12);
}

TEST(FitPlaneLsq, ThreePointsMatchLinearSolve) {
  const Vec3 a(1, 0, 1), b(0, 1, 2), c(-1, 0, 3);
  const std::vector<Vec3> pts{a, b, c};
  const PlaneFit f = fit_plane_lsq(pts);
  EXPECT_LE((f.plane.param() - oracle::plane_param_through(a, b, c)).norm(), 1e-12);
}

TEST(FitPlaneLsq, RandomTriplesMatchLinearSolve) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const Vec3 a(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 4));
    const Vec3 b(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 4));
    const Vec3 c(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 4));
    const Vec3 want = oracle::plane_param_through(a, b, c);
    if (want.norm() < 0.05 || (b - a).cross(c - a).norm() < 0.1) continue;
    const std::vector<Vec3> pts{a, b, c};
    EXPECT_LE((fit_plane_lsq(pts).plane.param() - want).norm(), 1e-9 * std::max(1.0, want.norm()));
  }
}

TEST(FitPlaneLsq, DegenerateInputs) {
  const std::vector<Vec3> two{{0, 0, 1}, {1, 0, 1}};
  EXPECT_THROW(fit_plane_lsq(two), DegenerateGeometry);
  const std::vector<Vec3> collinear{{0, 0, 1}, {1, 0, 1}, {2, 0, 1}, {3, 0, 1}};
  EXPECT_THROW(fit_plane_lsq(collinear), DegenerateGeometry);
  const std::vector<Vec3> through_origin{{1, 0, 0}, {0, 1, 0}, {-1, -1, 0}};
  EXPECT_THROW(fit_plane_lsq(through_origin), DegeneratePlane);
}

TEST(FitPlaneLsq, PermutationAndRotationInvariance) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> pts;
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double d = rng.uniform(0.5, 3);
    const Vec3 t1 = n.unitOrthogonal(), t2 = n.cross(t1);
    for (int i = 0; i < 40; ++i) {
      pts.push_back(d * n + rng.uniform(-1, 1) * t1 + rng.uniform(-1, 1) * t2 + rng.normal() * 0.01 * n);
    }
    const PlaneFit base = fit_plane_lsq(pts);

    std::vector<Vec3> shuffled = pts;
    rng.shuffle(shuffled);
    const PlaneFit perm = fit_plane_lsq(shuffled);
    EXPECT_LE((perm.plane.param() - base.plane.param()).norm(), 1e-9);
    EXPECT_NEAR(perm.rms_residual, base.rms_residual, 1e-9);

    const Mat3 r = Eigen::AngleAxisd(rng.uniform(-3, 3), Vec3(rng.normal(), rng.normal(), rng.normal()).normalized())
                       .toRotationMatrix();
    std::vector<Vec3> rotated;
    for (const auto& p : pts) rotated.push_back(r * p);
    const PlaneFit rot = fit_plane_lsq(rotated);
    EXPECT_LE((rot.plane.param() - r * base.plane.param()).norm(), 1e-9);
    EXPECT_NEAR(rot.rms_residual, base.rms_residual, 1e-9);
  }
}

TEST(FitPlaneLsq, WeightsActAsMultiplicity) {
  const std::vector<Vec3> pts{{0, 0, 2}, {1, 0, 2.1}, {0, 1, 1.9}, {1, 1, 2.05}};
  const std::vector<double> w{1, 2, 1, 3};
  std::vector<Vec3> repeated;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < static_cast<int>(w[i]); ++k) repeated.push_back(pts[i]);
  }
  EXPECT_LE((fit_plane_lsq(pts, w).plane.param() - fit_plane_lsq(repeated).plane.param()).norm(), 1e-12);
}

TEST(Intrinsics, Validation) {
  EXPECT_NO_THROW((CameraIntrinsics{1, 1, 0, 0, 1, 1}.validate()));
  EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0, 1, 1}.validate()), ValidationError);
  EXPECT_THROW((CameraIntrinsics{1, 1, 4, 0, 4, 1}.validate()), ValidationError);
}

TEST(Pose, ValidationChecksOrthonormality) {
  Pose p;
  EXPECT_NO_THROW(p.validate());
  p.rotation(0, 1) = 1e-6;
  EXPECT_THROW(p.validate(), ValidationError);
  Pose mirror;
  mirror.rotation(0, 0) = -1;
  EXPECT_THROW(mirror.validate(), ValidationError);
}

TEST(Plane, TransformMatchesPointwiseMapping) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Plane w = Plane::from_normal_offset(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized(), rng.uniform(0.5, 4));
    Pose pose;
    pose.rotation = Eigen::AngleAxisd(rng.uniform(-3, 3), Vec3(rng.normal(), rng.normal(), rng.normal()).normalized()).toRotationMatrix();
    pose.translation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Plane c = Plane::from_param({0, 0, 1});
    try {
      c = w.transformed(pose);
    } catch (const DegeneratePlane&) {
      continue;
    }
    const Vec3 t1 = w.normal().unitOrthogonal();
    for (double s : {-1.0, 0.0, 2.0}) {
      const Vec3 xw = w.param() + s * t1;
      EXPECT_NEAR(c.signed_distance(pose.apply(xw)), 0.0, 1e-9);
    }
  }
}

}  // namespace
}  // namespace planekit

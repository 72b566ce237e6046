#pragma once

// Pinhole camera, closest-point plane encoding, backprojection, plane-induced
// depth and total-least-squares plane fitting.
//
// Conventions: camera +x right, +y down, +z forward; pixel centres at integer
// (u, v) with origin top-left; depth is camera-space z, not ray length.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planekit/errors.hpp"
#include "planekit/image.hpp"

namespace planekit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Planes closer than this to the camera centre are not representable.
inline constexpr double kMinPlaneOffset = 1e-4;
/// Rays with n.r at or below this never reach the plane.
inline constexpr double kMinRayDot = 1e-6;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  ImageSize size() const { return {width, height}; }

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw ValidationError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ValidationError("intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      throw ValidationError("intrinsics: principal point outside the image");
    }
  }

  /// Viewing ray through (u, v) scaled to unit z.
  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  /// Projects a camera-space point with z > 0.
  Eigen::Vector2d project(const Vec3& x) const { return {fx * x.x() / x.z() + cx, fy * x.y() / x.z() + cy}; }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Rigid world-to-camera transform: x_cam = rotation * x_world + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= 1e-9) || std::abs(rotation.determinant() - 1.0) > 1e-9) {
      throw ValidationError("pose: rotation must be orthonormal with determinant +1");
    }
    if (!translation.allFinite()) throw ValidationError("pose: non-finite translation");
  }

  Vec3 apply(const Vec3& world) const { return rotation * world + translation; }
  Vec3 camera_center() const { return -rotation.transpose() * translation; }
};

/// Intrinsics plus pose of one view.
struct Frame {
  CameraIntrinsics intrinsics;
  Pose pose;
};

/// A plane encoded by its point closest to the origin, P = d * n.
///
/// The normal always points away from the origin (d > 0), which makes the
/// encoding unique: (n, d) and (-n, -d) describe the same plane and map to
/// the same P. Normal and offset are stored alongside P so that planes built
/// from an exact axis keep that axis bit-for-bit.
class Plane {
public:
  /// Throws DegeneratePlane when |P| <= kMinPlaneOffset.
  static Plane from_param(const Vec3& param) {
    if (!param.allFinite()) throw DegeneratePlane("plane parameter is not finite");
    const double d = param.norm();
    if (!(d > kMinPlaneOffset)) throw DegeneratePlane("plane passes within 1e-4 m of the camera centre");
    Plane out(param / d, d);
    out.param_ = param;
    return out;
  }

  /// `normal` must be unit length within 1e-9; `offset` must exceed kMinPlaneOffset.
  static Plane from_normal_offset(const Vec3& normal, double offset) {
    if (!normal.allFinite() || std::abs(normal.norm() - 1.0) > 1e-9) {
      throw PreconditionError("plane normal must be unit length");
    }
    if (!(offset > kMinPlaneOffset)) throw DegeneratePlane("plane offset must exceed 1e-4 m");
    return Plane(normal, offset);
  }

  /// Signed form n.x = d with any sign of d; canonicalised to d > 0.
  static Plane from_signed(const Vec3& normal, double offset) {
    if (offset < 0.0) return from_normal_offset(-normal, -offset);
    return from_normal_offset(normal, offset);
  }

  /// Exactly the vector given to from_param, otherwise offset * normal.
  const Vec3& param() const { return param_; }
  const Vec3& normal() const { return normal_; }
  double offset() const { return offset_; }

  double signed_distance(const Vec3& x) const { return normal_.dot(x) - offset_; }
  double distance(const Vec3& x) const { return std::abs(signed_distance(x)); }

  /// Same plane expressed in the camera frame of `pose` (input in world frame).
  Plane transformed(const Pose& pose) const {
    const Vec3 n = pose.rotation * normal_;
    return from_signed(n, offset_ + n.dot(pose.translation));
  }

  /// Multiplies the offset by `factor` > 0 (a scaled copy of the scene).
  Plane scaled(double factor) const { return from_normal_offset(normal_, offset_ * factor); }

  bool operator==(const Plane&) const = default;

private:
  Plane(const Vec3& n, double d) : normal_(n), offset_(d), param_(d * n) {}

  Vec3 normal_ = Vec3::UnitZ();
  double offset_ = 1.0;
  Vec3 param_ = Vec3::UnitZ();
};

inline Plane plane_from_normal_offset(const Vec3& normal, double offset) {
  return Plane::from_normal_offset(normal, offset);
}

/// Camera-space point at `depth` along the ray through `pixel`.
inline Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& k) {
  require(depth > 0.0 && std::isfinite(depth), "backproject: depth must be positive");
  require(u > -0.5 && v > -0.5 && u < k.width - 0.5 && v < k.height - 0.5, "backproject: pixel outside image");
  return depth * k.ray(u, v);
}

/// Depth z = d / (n.r) of the plane along the ray through (u, v); empty when
/// n.r <= kMinRayDot (plane behind the camera or parallel to the ray).
inline std::optional<double> plane_depth(const Plane& plane, double u, double v, const CameraIntrinsics& k) {
  const double nr = plane.normal().dot(k.ray(u, v));
  if (!(nr > kMinRayDot)) return std::nullopt;
  return plane.offset() / nr;
}

inline DepthMap render_plane_depthmap(const Plane& plane, const CameraIntrinsics& k) {
  DepthMap out(k.width, k.height);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      if (auto z = plane_depth(plane, u, v, k)) out.set(u, v, *z);
    }
  }
  return out;
}

/// Points with optional per-point weights (empty = all ones).
struct Point3Set {
  std::vector<Vec3> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

struct PlaneFit {
  Plane plane;
  double rms_residual = 0.0;
};

/// Weighted total least squares: centroid plus the covariance eigenvector with
/// the smallest eigenvalue. Throws DegenerateGeometry for fewer than three or
/// collinear points and DegeneratePlane when the fit passes through the origin.
inline PlaneFit fit_plane_lsq(std::span<const Vec3> points, std::span<const double> weights = {}) {
  if (points.size() < 3) throw DegenerateGeometry("plane fit needs at least three points");
  if (!weights.empty() && weights.size() != points.size()) throw DimensionMismatch("plane fit: weight count");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double total = 0.0;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) throw PreconditionError("plane fit: non-finite point");
    centroid += w(i) * points[i];
    total += w(i);
  }
  if (!(total > 0.0)) throw DegenerateGeometry("plane fit: zero total weight");
  centroid /= total;

  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = points[i] - centroid;
    cov.noalias() += w(i) * q * q.transpose();
  }
  cov /= total;

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 eig = solver.eigenvalues();  // ascending
  if (!(eig(2) > 0.0) || eig(1) <= 1e-12 * eig(2)) {
    throw DegenerateGeometry("plane fit: points are coincident or collinear");
  }
  const Vec3 normal = solver.eigenvectors().col(0).normalized();
  const double offset = normal.dot(centroid);
  if (!(std::abs(offset) > kMinPlaneOffset)) throw DegeneratePlane("fitted plane passes through the camera centre");
  Plane plane = Plane::from_signed(normal, offset);

  double ss = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = plane.signed_distance(points[i]);
    ss += w(i) * r * r;
  }
  return {plane, std::sqrt(ss / total)};
}

inline PlaneFit fit_plane_lsq(const Point3Set& set) { return fit_plane_lsq(set.points, set.weights); }

/// Unsigned angle between two plane normals in degrees, in [0, 90].
inline double normal_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c) * 180.0 / 3.14159265358979323846;
}

}  // namespace planekit

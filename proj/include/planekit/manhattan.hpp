#pragma once

// Dominant (Manhattan) direction voting over plane normals and snapping of
// plane hypotheses onto the voted axes.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/ransac.hpp"

namespace planekit {

struct ManhattanFrame {
  /// Columns are the three axes; right-handed and orthonormal.
  Mat3 axes = Mat3::Identity();
  /// How many axes were backed by votes (3 = full frame). Fewer means the
  /// missing axes were completed from the camera's up direction.
  int supported_axes = 3;

  Vec3 axis(int i) const { return axes.col(i); }
  bool insufficient_directions() const { return supported_axes < 2; }
};

struct WeightedNormal {
  Vec3 normal;
  double weight = 1.0;
};

struct ManhattanConfig {
  double vote_cone_deg = 10.0;
  double snap_cone_deg = 30.0;
};

namespace detail {

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Sign convention: the largest-magnitude component is positive.
inline Vec3 canonical_sign(const Vec3& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  return v(k) < 0.0 ? Vec3(-v) : v;
}

/// Index of the normal with the most accumulated weight within the cone among
/// `candidates`; support is accumulated over the same candidate list.
inline std::optional<std::size_t> best_direction(std::span<const WeightedNormal> normals,
                                                 const std::vector<std::size_t>& candidates, double cos_cone) {
  std::optional<std::size_t> best;
  double best_score = -1.0;
  for (std::size_t ci : candidates) {
    double score = 0.0;
    for (std::size_t cj : candidates) {
      if (std::abs(normals[ci].normal.dot(normals[cj].normal)) >= cos_cone) score += normals[cj].weight;
    }
    if (score > best_score) {
      best_score = score;
      best = ci;
    }
  }
  return best;
}

/// Weighted, sign-aligned mean of the normals within the cone of `axis`.
inline Vec3 refine_axis(std::span<const WeightedNormal> normals, const Vec3& axis, double cos_cone) {
  Vec3 sum = Vec3::Zero();
  for (const auto& wn : normals) {
    const double c = axis.dot(wn.normal);
    if (std::abs(c) >= cos_cone) sum += (c < 0.0 ? -wn.weight : wn.weight) * wn.normal;
  }
  return sum.norm() > 0.0 ? Vec3(sum.normalized()) : axis;
}

/// Nearest rotation (Frobenius) to the matrix with the given columns.
inline Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace detail

/// Greedy voting: the best-supported direction, then the best direction within
/// the cone of orthogonality to it, then their cross product. Each axis is
/// refined as the weighted mean of its supporters and the triple is projected
/// to the nearest rotation. Input normal signs do not matter.
inline ManhattanFrame vote_manhattan(std::span<const WeightedNormal> normals, const ManhattanConfig& cfg = {}) {
  require(!normals.empty(), "vote_manhattan needs at least one normal");
  std::vector<WeightedNormal> unit;
  unit.reserve(normals.size());
  for (const auto& wn : normals) {
    require(wn.normal.allFinite() && wn.normal.norm() > 0.0, "vote_manhattan: zero normal");
    require(wn.weight >= 0.0, "vote_manhattan: negative weight");
    unit.push_back({wn.normal.normalized(), wn.weight});
  }
  const double cos_cone = std::cos(detail::deg2rad(cfg.vote_cone_deg));
  const double sin_cone = std::sin(detail::deg2rad(cfg.vote_cone_deg));

  std::vector<std::size_t> all(unit.size());
  std::iota(all.begin(), all.end(), 0);
  const Vec3 first = detail::canonical_sign(unit[*detail::best_direction(unit, all, cos_cone)].normal);

  std::vector<std::size_t> orthogonal;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    if (std::abs(unit[i].normal.dot(first)) <= sin_cone) orthogonal.push_back(i);
  }

  ManhattanFrame frame;
  Vec3 a1 = detail::refine_axis(unit, first, cos_cone);
  a1 = detail::canonical_sign(a1);
  Vec3 a2;
  if (auto second = detail::best_direction(unit, orthogonal, cos_cone)) {
    a2 = unit[*second].normal;
    frame.supported_axes = 2;
  } else {
    // Completion from the camera's up direction (-y), or forward when the
    // first axis is vertical.
    const Vec3 up(0.0, -1.0, 0.0);
    a2 = std::abs(a1.dot(up)) < std::cos(detail::deg2rad(cfg.vote_cone_deg)) ? up : Vec3(0.0, 0.0, 1.0);
    frame.supported_axes = 1;
  }
  if (frame.supported_axes == 2) a2 = detail::refine_axis(unit, a2, cos_cone);
  a2 = (a2 - a2.dot(a1) * a1).normalized();
  a2 = detail::canonical_sign(a2);
  Vec3 a3 = a1.cross(a2);
  if (frame.supported_axes == 2) {
    bool has_third = false;
    for (const auto& wn : unit) has_third |= std::abs(wn.normal.dot(a3)) >= cos_cone;
    if (has_third) {
      frame.supported_axes = 3;
      a3 = detail::refine_axis(unit, a3, cos_cone);
    }
  }
  Mat3 m;
  m.col(0) = a1;
  m.col(1) = a2;
  m.col(2) = a3;
  frame.axes = frame.supported_axes == 1 ? m : detail::nearest_rotation(m);
  // Re-derive the third axis so the frame is exactly right-handed.
  frame.axes.col(2) = frame.axes.col(0).cross(frame.axes.col(1)).normalized();
  return frame;
}

inline ManhattanFrame vote_manhattan(std::span<const Plane> planes, std::span<const double> weights,
                                     const ManhattanConfig& cfg = {}) {
  std::vector<WeightedNormal> normals;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    normals.push_back({planes[i].normal(), weights.empty() ? 1.0 : weights[i]});
  }
  return vote_manhattan(normals, cfg);
}

/// Index of the frame axis within `cone_deg` of the normal, if any.
inline std::optional<int> closest_axis(const ManhattanFrame& frame, const Vec3& normal, double cone_deg) {
  int best = -1;
  double best_cos = std::cos(detail::deg2rad(cone_deg));
  for (int a = 0; a < 3; ++a) {
    const double c = std::abs(frame.axis(a).dot(normal));
    if (c >= best_cos) {
      best_cos = c;
      best = a;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Replaces the normal of each plane within the snap cone of an axis by that
/// axis (sign matched to the original normal) and re-estimates the offset as
/// the median of axis.x over the plane's inliers. Planes outside every cone,
/// or without inliers, pass through unchanged.
inline std::vector<Plane> snap_to_manhattan(std::span<const Plane> planes,
                                            std::span<const std::vector<std::size_t>> inliers,
                                            const ManhattanFrame& frame, const Point3Set& points,
                                            const ManhattanConfig& cfg = {}) {
  require(!planes.empty(), "snap_to_manhattan: no planes");
  require(inliers.size() == planes.size(), "snap_to_manhattan: inlier list count must match planes");
  std::vector<Plane> out;
  out.reserve(planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const Plane& p = planes[i];
    auto axis_index = closest_axis(frame, p.normal(), cfg.snap_cone_deg);
    if (!axis_index || inliers[i].empty()) {
      out.push_back(p);
      continue;
    }
    Vec3 axis = frame.axis(*axis_index);
    if (axis.dot(p.normal()) < 0.0) axis = -axis;
    std::vector<double> proj;
    proj.reserve(inliers[i].size());
    for (std::size_t idx : inliers[i]) proj.push_back(axis.dot(points.points.at(idx)));
    const double d = detail::median(std::move(proj));
    if (!(d > kMinPlaneOffset)) {
      out.push_back(p);
      continue;
    }
    out.push_back(Plane::from_normal_offset(axis, d));
  }
  return out;
}

inline std::vector<Plane> snap_to_manhattan(std::span<const ExtractedPlane> planes, const ManhattanFrame& frame,
                                            const Point3Set& points, const ManhattanConfig& cfg = {}) {
  std::vector<Plane> ps;
  std::vector<std::vector<std::size_t>> in;
  for (const auto& e : planes) {
    ps.push_back(e.plane);
    in.push_back(e.inlier_indices);
  }
  return snap_to_manhattan(ps, in, frame, points, cfg);
}

/// Texture axes of a planar region: u is the Manhattan axis most parallel to
/// the plane, v = u x n.
inline std::pair<Vec3, Vec3> manhattan_uv_axes(const Plane& plane, const ManhattanFrame& frame) {
  int best = 0;
  double best_dot = 2.0;
  for (int a = 0; a < 3; ++a) {
    const double c = std::abs(frame.axis(a).dot(plane.normal()));
    if (c < best_dot) {
      best_dot = c;
      best = a;
    }
  }
  const Vec3& n = plane.normal();
  Vec3 u = frame.axis(best);
  u = (u - u.dot(n) * n).normalized();
  return {u, u.cross(n)};
}

}  // namespace planekit

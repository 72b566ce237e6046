#pragma once

// Sequential RANSAC plane extraction "with replacement": points already
// explained by an earlier plane may support later planes, but only
// not-yet-covered points count toward coverage and termination.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/random.hpp"

namespace planekit {

struct RansacConfig {
  double inlier_threshold = 0.05;  ///< metres
  double coverage_target = 0.90;   ///< fraction of input points
  int iterations_per_plane = 500;
  int min_inliers = 30;
  std::uint64_t rng_seed = 0;
  /// Least-squares refit rounds after the hypothesis is chosen.
  int refit_rounds = 3;

  void validate() const {
    if (!(inlier_threshold > 0.0)) throw InvalidConfig("ransac: inlier_threshold must be positive");
    if (!(coverage_target > 0.0 && coverage_target <= 1.0)) throw InvalidConfig("ransac: coverage_target must be in (0, 1]");
    if (iterations_per_plane < 1) throw InvalidConfig("ransac: iterations_per_plane must be >= 1");
    if (min_inliers < 3) throw InvalidConfig("ransac: min_inliers must be >= 3");
    if (refit_rounds < 0) throw InvalidConfig("ransac: refit_rounds must be >= 0");
  }
};

struct ExtractedPlane {
  Plane plane;
  std::vector<std::size_t> inlier_indices;  ///< ascending, may include points covered earlier
  double rms_residual = 0.0;
  std::size_t newly_covered = 0;  ///< inliers that were not covered by earlier planes
};

struct ExtractionResult {
  std::vector<ExtractedPlane> planes;  ///< descending inlier count
  double coverage = 0.0;               ///< covered fraction after the last round
  std::vector<double> coverage_per_round;
};

namespace detail {

inline std::optional<Plane> plane_through(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
  if (!(len > 1e-12 * scale)) return std::nullopt;
  const Vec3 unit = n / len;
  const double d = unit.dot(a);
  if (!(std::abs(d) > kMinPlaneOffset)) return std::nullopt;
  return Plane::from_signed(unit, d);
}

}  // namespace detail

/// Full extraction with coverage bookkeeping. Throws NoPlaneFound when the
/// first round cannot find `min_inliers` support.
inline ExtractionResult extract_planes_detailed(const Point3Set& set, const RansacConfig& cfg) {
  cfg.validate();
  const auto& pts = set.points;
  const std::size_t n = pts.size();
  if (n < 3) throw PreconditionError("extract_planes needs at least three points");

  Rng rng(cfg.rng_seed);
  std::vector<std::uint8_t> covered(n, 0);
  std::size_t covered_count = 0;
  ExtractionResult result;
  const double thr = cfg.inlier_threshold;

  std::vector<std::size_t> uncovered;
  uncovered.reserve(n);

  while (true) {
    uncovered.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (!covered[i]) uncovered.push_back(i);
    }
    if (uncovered.size() < 3) break;

    // Hypothesis search among uncovered points. Strict '>' keeps the lowest
    // trial index on ties.
    std::optional<Plane> best;
    std::size_t best_count = 0;
    for (int trial = 0; trial < cfg.iterations_per_plane; ++trial) {
      const std::size_t m = uncovered.size();
      const std::size_t i0 = rng.index(m);
      std::size_t i1 = rng.index(m - 1);
      if (i1 >= i0) ++i1;
      std::size_t i2 = rng.index(m - 2);
      const std::size_t lo = std::min(i0, i1), hi = std::max(i0, i1);
      if (i2 >= lo) ++i2;
      if (i2 >= hi) ++i2;
      auto hyp = detail::plane_through(pts[uncovered[i0]], pts[uncovered[i1]], pts[uncovered[i2]]);
      if (!hyp) continue;
      std::size_t count = 0;
      for (std::size_t idx : uncovered) {
        if (hyp->distance(pts[idx]) <= thr) ++count;
      }
      if (!best || count > best_count) {
        best = hyp;
        best_count = count;
      }
    }

    const bool first = result.planes.empty();
    if (!best || best_count < static_cast<std::size_t>(cfg.min_inliers)) {
      if (first) throw NoPlaneFound("no plane with at least min_inliers support");
      break;
    }

    // Least-squares refit on the uncovered support, iterated.
    Plane plane = *best;
    for (int round = 0; round < cfg.refit_rounds; ++round) {
      std::vector<Vec3> support;
      std::vector<double> weights;
      for (std::size_t idx : uncovered) {
        if (plane.distance(pts[idx]) <= thr) {
          support.push_back(pts[idx]);
          if (!set.weights.empty()) weights.push_back(set.weights[idx]);
        }
      }
      if (support.size() < 3) break;
      try {
        plane = fit_plane_lsq(support, weights).plane;
      } catch (const Error&) {
        break;
      }
    }

    ExtractedPlane ep{plane, {}, 0.0, 0};
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = plane.distance(pts[i]);
      if (r <= thr) {
        ep.inlier_indices.push_back(i);
        ss += r * r;
        if (!covered[i]) ++ep.newly_covered;
      }
    }
    if (ep.newly_covered < static_cast<std::size_t>(cfg.min_inliers)) {
      if (first) throw NoPlaneFound("refitted plane lost its support");
      break;
    }
    ep.rms_residual = std::sqrt(ss / static_cast<double>(ep.inlier_indices.size()));
    for (std::size_t idx : ep.inlier_indices) {
      if (!covered[idx]) {
        covered[idx] = 1;
        ++covered_count;
      }
    }
    result.planes.push_back(std::move(ep));
    result.coverage = static_cast<double>(covered_count) / static_cast<double>(n);
    result.coverage_per_round.push_back(result.coverage);
    if (result.coverage >= cfg.coverage_target) break;
  }

  std::stable_sort(result.planes.begin(), result.planes.end(), [](const ExtractedPlane& a, const ExtractedPlane& b) {
    return a.inlier_indices.size() > b.inlier_indices.size();
  });
  return result;
}

inline std::vector<ExtractedPlane> extract_planes(const Point3Set& points, const RansacConfig& cfg) {
  return extract_planes_detailed(points, cfg).planes;
}

/// Backprojects the valid pixels of a depth map, sampling every `stride`-th
/// pixel in each direction. `pixel_of` receives the source pixel index per point.
inline Point3Set depth_to_points(const DepthMap& depth, const CameraIntrinsics& k, int stride = 1,
                                 std::vector<std::size_t>* pixel_of = nullptr) {
  require_same_size(depth.size(), k.size(), "depth_to_points");
  require(stride >= 1, "depth_to_points: stride must be >= 1");
  Point3Set out;
  for (int v = 0; v < depth.height(); v += stride) {
    for (int u = 0; u < depth.width(); u += stride) {
      if (!depth.valid(u, v)) continue;
      out.points.push_back(depth.depth(u, v) * k.ray(u, v));
      if (pixel_of) pixel_of->push_back(depth.size().index(u, v));
    }
  }
  return out;
}

}  // namespace planekit

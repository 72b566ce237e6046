#pragma once

// Depth-driven plane segmentation: truncated point-to-plane unaries with a
// contrast-sensitive Potts pairwise term on the 4-neighbourhood, minimised by
// ICM or alpha-expansion. The Manhattan variant snaps hypotheses to dominant
// axes and discounts label changes along projected axis directions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/manhattan.hpp"
#include "planekit/maxflow.hpp"
#include "planekit/random.hpp"

namespace planekit {

/// Discrete labeling problem with Potts pairwise terms:
/// E(l) = sum_p unary[p][l_p] + sum_edges w_e [l_a != l_b].
struct PottsProblem {
  struct Edge {
    int a = 0;
    int b = 0;
    double weight = 0.0;
  };

  int num_nodes = 0;
  int num_labels = 0;
  std::vector<double> unary;  ///< node-major, num_nodes * num_labels
  std::vector<Edge> edges;

  double unary_cost(int node, int label) const {
    return unary[static_cast<std::size_t>(node) * static_cast<std::size_t>(num_labels) + static_cast<std::size_t>(label)];
  }

  double energy(std::span<const int> labels) const {
    double e = 0.0;
    for (int p = 0; p < num_nodes; ++p) e += unary_cost(p, labels[p]);
    for (const auto& ed : edges) {
      if (labels[ed.a] != labels[ed.b]) e += ed.weight;
    }
    return e;
  }

  /// Per-node argmin of the unary term, ties to the lowest label.
  std::vector<int> unary_argmin() const {
    std::vector<int> out(static_cast<std::size_t>(num_nodes), 0);
    for (int p = 0; p < num_nodes; ++p) {
      double best = unary_cost(p, 0);
      for (int l = 1; l < num_labels; ++l) {
        if (unary_cost(p, l) < best) {
          best = unary_cost(p, l);
          out[p] = l;
        }
      }
    }
    return out;
  }

  void validate() const {
    require(num_nodes >= 0 && num_labels >= 1, "potts problem: bad sizes");
    require(unary.size() == static_cast<std::size_t>(num_nodes) * static_cast<std::size_t>(num_labels),
            "potts problem: unary size");
    for (const auto& e : edges) {
      require(e.a >= 0 && e.b >= 0 && e.a < num_nodes && e.b < num_nodes && e.a != e.b, "potts problem: edge index");
      require(e.weight >= 0.0, "potts problem: negative pairwise weight");
    }
  }
};

struct SolveTrace {
  std::vector<double> energies;  ///< energy after initialisation and after each sweep / cycle
  int iterations = 0;
};

namespace detail {

struct Adjacency {
  std::vector<int> offsets;
  std::vector<std::pair<int, double>> items;
};

inline Adjacency build_adjacency(const PottsProblem& pb) {
  Adjacency adj;
  adj.offsets.assign(static_cast<std::size_t>(pb.num_nodes) + 1, 0);
  for (const auto& e : pb.edges) {
    ++adj.offsets[e.a + 1];
    ++adj.offsets[e.b + 1];
  }
  for (int i = 0; i < pb.num_nodes; ++i) adj.offsets[i + 1] += adj.offsets[i];
  adj.items.resize(static_cast<std::size_t>(adj.offsets.back()));
  std::vector<int> fill(adj.offsets.begin(), adj.offsets.end() - 1);
  for (const auto& e : pb.edges) {
    adj.items[fill[e.a]++] = {e.b, e.weight};
    adj.items[fill[e.b]++] = {e.a, e.weight};
  }
  return adj;
}

}  // namespace detail

/// Iterated conditional modes in scan order. A pixel moves only when its local
/// energy strictly decreases, so the energy never increases. Stops after a
/// sweep without changes or after `max_sweeps`.
inline std::vector<int> solve_icm(const PottsProblem& pb, std::vector<int> labels, int max_sweeps,
                                  SolveTrace* trace = nullptr) {
  pb.validate();
  require(labels.size() == static_cast<std::size_t>(pb.num_nodes), "icm: label count");
  const auto adj = detail::build_adjacency(pb);
  std::vector<double> local(static_cast<std::size_t>(pb.num_labels));
  if (trace) trace->energies.push_back(pb.energy(labels));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int p = 0; p < pb.num_nodes; ++p) {
      double nb_total = 0.0;
      for (int l = 0; l < pb.num_labels; ++l) local[l] = pb.unary_cost(p, l);
      for (int k = adj.offsets[p]; k < adj.offsets[p + 1]; ++k) {
        const auto [q, w] = adj.items[k];
        nb_total += w;
        local[labels[q]] -= w;  // neighbours sharing the label cost nothing
      }
      const int cur = labels[p];
      int best = cur;
      double best_cost = local[cur] + nb_total;
      for (int l = 0; l < pb.num_labels; ++l) {
        const double c = local[l] + nb_total;
        if (c < best_cost) {
          best_cost = c;
          best = l;
        }
      }
      if (best != cur) {
        labels[p] = best;
        changed = true;
      }
    }
    if (trace) {
      trace->energies.push_back(pb.energy(labels));
      trace->iterations = sweep + 1;
    }
    if (!changed) break;
  }
  return labels;
}

/// One alpha-expansion move: optimal binary choice per node between its
/// current label and `alpha`, solved exactly by a minimum cut.
inline std::vector<int> expansion_move(const PottsProblem& pb, const std::vector<int>& labels, int alpha) {
  const int n = pb.num_nodes;
  MaxFlow g(n + 2);
  const int s = n, t = n + 1;
  // cost0 / cost1: node cost when keeping its label / switching to alpha.
  std::vector<double> cost0(static_cast<std::size_t>(n)), cost1(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    cost0[p] = pb.unary_cost(p, labels[p]);
    cost1[p] = labels[p] == alpha ? cost0[p] : pb.unary_cost(p, alpha);
  }
  for (const auto& e : pb.edges) {
    const int la = labels[e.a], lb = labels[e.b];
    const double w = e.weight;
    // A = E(keep, keep), B = E(keep, alpha), C = E(alpha, keep), D = E(alpha, alpha) = 0.
    const double A = la != lb ? w : 0.0;
    const double B = la != alpha ? w : 0.0;
    const double C = alpha != lb ? w : 0.0;
    const double D = 0.0;
    // E = A + (C - A) x_a + (D - C) x_b + (B + C - A - D)(1 - x_a) x_b
    cost0[e.a] += A;
    cost1[e.a] += C;
    cost1[e.b] += D - C;
    const double pair = B + C - A - D;
    if (pair > 0.0) g.add_edge(e.a, e.b, pair);
  }
  // Source side = keep (x = 0), sink side = alpha (x = 1).
  for (int p = 0; p < n; ++p) {
    const double m = std::min(cost0[p], cost1[p]);
    const double c0 = cost0[p] - m, c1 = cost1[p] - m;
    if (c1 > 0.0) g.add_edge(s, p, c1);
    if (c0 > 0.0) g.add_edge(p, t, c0);
  }
  g.solve(s, t);
  std::vector<int> out = labels;
  for (int p = 0; p < n; ++p) {
    if (!g.source_side(p)) out[p] = alpha;
  }
  return out;
}

/// Alpha-expansion: cycles over labels (order shuffled per cycle from `seed`),
/// accepting a move only when it lowers the energy; stops after a cycle
/// without improvement or `max_cycles`.
inline std::vector<int> solve_alpha_expansion(const PottsProblem& pb, std::vector<int> labels, int max_cycles,
                                              std::uint64_t seed = 0, SolveTrace* trace = nullptr) {
  pb.validate();
  require(labels.size() == static_cast<std::size_t>(pb.num_nodes), "alpha-expansion: label count");
  Rng rng(seed);
  double energy = pb.energy(labels);
  if (trace) trace->energies.push_back(energy);
  std::vector<int> order(static_cast<std::size_t>(pb.num_labels));
  std::iota(order.begin(), order.end(), 0);
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    bool improved = false;
    if (seed != 0) rng.shuffle(order);
    for (int alpha : order) {
      auto candidate = expansion_move(pb, labels, alpha);
      const double e = pb.energy(candidate);
      if (e < energy - 1e-12 * std::max(1.0, std::abs(energy))) {
        labels = std::move(candidate);
        energy = e;
        improved = true;
      }
    }
    if (trace) {
      trace->energies.push_back(energy);
      trace->iterations = cycle + 1;
    }
    if (!improved) break;
  }
  return labels;
}

/// Exhaustive minimum over all labelings; only for tiny problems.
inline std::vector<int> solve_brute_force(const PottsProblem& pb) {
  pb.validate();
  double total = std::pow(static_cast<double>(pb.num_labels), pb.num_nodes);
  require(total <= 2e7, "brute force: problem too large");
  std::vector<int> cur(static_cast<std::size_t>(pb.num_nodes), 0), best = cur;
  double best_e = pb.energy(cur);
  while (true) {
    int i = 0;
    while (i < pb.num_nodes && ++cur[i] == pb.num_labels) cur[i++] = 0;
    if (i == pb.num_nodes) break;
    const double e = pb.energy(cur);
    if (e < best_e) {
      best_e = e;
      best = cur;
    }
  }
  return best;
}

enum class MrfSolver { icm, alpha_expansion };

struct MrfConfig {
  double unary_truncation = 0.3;  ///< metres
  double nonplanar_unary = 0.05;  ///< metres
  double pairwise_weight = 5.0;
  double edge_sigma = 10.0;  ///< intensity units
  MrfSolver solver = MrfSolver::icm;
  int max_sweeps = 10;  ///< ICM sweeps, or alpha-expansion cycles
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(unary_truncation > 0.0)) throw InvalidConfig("mrf: unary_truncation must be positive");
    if (!(nonplanar_unary > 0.0)) throw InvalidConfig("mrf: nonplanar_unary must be positive");
    if (!(pairwise_weight >= 0.0)) throw InvalidConfig("mrf: pairwise_weight must be non-negative");
    if (!(edge_sigma > 0.0)) throw InvalidConfig("mrf: edge_sigma must be positive");
    if (max_sweeps < 0) throw InvalidConfig("mrf: max_sweeps must be non-negative");
  }
};

/// Builds the labeling problem: labels 0..K-1 are the planes, K is non-planar.
/// `pair_scale(p, q)`, when given, multiplies each pairwise weight.
inline PottsProblem build_plane_mrf(const DepthMap& depth, const RgbImage& image, std::span<const Plane> planes,
                                    const CameraIntrinsics& k, const MrfConfig& cfg,
                                    const std::function<double(std::size_t, std::size_t)>& pair_scale = {}) {
  cfg.validate();
  require(!planes.empty(), "mrf: at least one plane hypothesis is required");
  require_same_size(depth.size(), image.size(), "mrf: depth vs image");
  require_same_size(depth.size(), k.size(), "mrf: depth vs intrinsics");

  const int K = static_cast<int>(planes.size());
  PottsProblem pb;
  pb.num_nodes = static_cast<int>(depth.pixels());
  pb.num_labels = K + 1;
  pb.unary.assign(static_cast<std::size_t>(pb.num_nodes) * static_cast<std::size_t>(pb.num_labels), 0.0);
  const ImageSize sz = depth.size();
  for (int v = 0; v < sz.height; ++v) {
    for (int u = 0; u < sz.width; ++u) {
      const std::size_t i = sz.index(u, v);
      if (!depth.valid(i)) continue;  // uniform (zero) unary
      const Vec3 x = depth.depth(i) * k.ray(u, v);
      double* row = &pb.unary[i * static_cast<std::size_t>(pb.num_labels)];
      for (int l = 0; l < K; ++l) row[l] = std::min(planes[l].distance(x), cfg.unary_truncation);
      row[K] = cfg.nonplanar_unary;
    }
  }
  const double inv = 1.0 / (2.0 * cfg.edge_sigma * cfg.edge_sigma);
  auto add = [&](std::size_t p, std::size_t q) {
    double w = cfg.pairwise_weight * std::exp(-color_distance_sq(image[p], image[q]) * inv);
    if (pair_scale) w *= pair_scale(p, q);
    pb.edges.push_back({static_cast<int>(p), static_cast<int>(q), w});
  };
  for (int v = 0; v < sz.height; ++v) {
    for (int u = 0; u < sz.width; ++u) {
      const std::size_t i = sz.index(u, v);
      if (u + 1 < sz.width) add(i, i + 1);
      if (v + 1 < sz.height) add(i, sz.index(u, v + 1));
    }
  }
  return pb;
}

struct MrfResult {
  LabelMap labels;
  double energy = 0.0;
  SolveTrace trace;
};

inline MrfResult solve_plane_mrf(const PottsProblem& pb, const ImageSize& size, int num_planes, const MrfConfig& cfg) {
  auto init = pb.unary_argmin();
  MrfResult r;
  std::vector<int> labels = cfg.solver == MrfSolver::icm
                                ? solve_icm(pb, std::move(init), cfg.max_sweeps, &r.trace)
                                : solve_alpha_expansion(pb, std::move(init), std::max(cfg.max_sweeps, 1), cfg.rng_seed, &r.trace);
  r.energy = pb.energy(labels);
  r.labels = LabelMap(size.width, size.height, num_planes);
  for (std::size_t i = 0; i < labels.size(); ++i) r.labels.set(i, labels[i]);
  return r;
}

inline MrfResult mrf_segment_detailed(const DepthMap& depth, const RgbImage& image, std::span<const Plane> planes,
                                      const CameraIntrinsics& k, const MrfConfig& cfg) {
  const auto pb = build_plane_mrf(depth, image, planes, k, cfg);
  return solve_plane_mrf(pb, depth.size(), static_cast<int>(planes.size()), cfg);
}

/// Baseline segmentation of a depth map into the given plane hypotheses.
inline LabelMap mrf_segment(const DepthMap& depth, const RgbImage& image, std::span<const Plane> planes,
                            const CameraIntrinsics& k, const MrfConfig& cfg) {
  return mrf_segment_detailed(depth, image, planes, k, cfg).labels;
}

struct MwsConfig {
  MrfConfig mrf;
  ManhattanConfig manhattan;
  double snap_inlier_threshold = 0.05;  ///< metres; pixels supporting a hypothesis during snapping
  double aligned_pair_scale = 0.2;      ///< pairwise multiplier along projected axis directions
  double align_cone_deg = 10.0;
};

/// Image direction of the projection of 3D direction `axis` through the pixel
/// with normalised coordinates (x, y); zero at the axis's vanishing point.
inline Eigen::Vector2d projected_axis_direction(const Vec3& axis, double x, double y, const CameraIntrinsics& k) {
  return {k.fx * (axis.x() - x * axis.z()), k.fy * (axis.y() - y * axis.z())};
}

/// True when the boundary between the neighbouring pixels (u0,v0) and (u1,v1)
/// runs within `cone_deg` of a projected frame axis at their midpoint.
inline bool boundary_follows_axis(const ManhattanFrame& frame, const CameraIntrinsics& k, int u0, int v0, int u1,
                                  int v1, double cone_deg) {
  const double um = 0.5 * (u0 + u1), vm = 0.5 * (v0 + v1);
  const double x = (um - k.cx) / k.fx, y = (vm - k.cy) / k.fy;
  // Boundary direction is perpendicular to the neighbour offset.
  const Eigen::Vector2d boundary(-(v1 - v0), u1 - u0);
  const double cos_cone = std::cos(cone_deg * std::numbers::pi / 180.0);
  for (int a = 0; a < 3; ++a) {
    const Eigen::Vector2d dir = projected_axis_direction(frame.axis(a), x, y, k);
    const double len = dir.norm();
    if (!(len > 1e-9 * std::max(k.fx, k.fy))) continue;
    if (std::abs(dir.dot(boundary)) / (len * boundary.norm()) >= cos_cone) return true;
  }
  return false;
}

struct MwsResult {
  LabelMap labels;
  std::vector<Plane> planes;  ///< hypotheses after snapping
  double energy = 0.0;
};

/// Manhattan-world variant: hypotheses snapped to `frame`, and pairwise weights
/// scaled by `aligned_pair_scale` where the label boundary follows a projected axis.
inline MwsResult mws_segment_detailed(const DepthMap& depth, const RgbImage& image, std::span<const Plane> planes,
                                      const CameraIntrinsics& k, const ManhattanFrame& frame, const MwsConfig& cfg) {
  require(!planes.empty(), "mws: at least one plane hypothesis is required");
  require_same_size(depth.size(), k.size(), "mws: depth vs intrinsics");
  std::vector<std::size_t> pixel_of;
  const Point3Set pts = depth_to_points(depth, k, 1, &pixel_of);
  std::vector<std::vector<std::size_t>> inliers(planes.size());
  for (std::size_t j = 0; j < planes.size(); ++j) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (planes[j].distance(pts.points[i]) <= cfg.snap_inlier_threshold) inliers[j].push_back(i);
    }
  }
  MwsResult out;
  out.planes = snap_to_manhattan(planes, inliers, frame, pts, cfg.manhattan);

  const ImageSize sz = depth.size();
  auto scale = [&](std::size_t p, std::size_t q) {
    const int u0 = static_cast<int>(p % static_cast<std::size_t>(sz.width));
    const int v0 = static_cast<int>(p / static_cast<std::size_t>(sz.width));
    const int u1 = static_cast<int>(q % static_cast<std::size_t>(sz.width));
    const int v1 = static_cast<int>(q / static_cast<std::size_t>(sz.width));
    return boundary_follows_axis(frame, k, u0, v0, u1, v1, cfg.align_cone_deg) ? cfg.aligned_pair_scale : 1.0;
  };
  const auto pb = build_plane_mrf(depth, image, out.planes, k, cfg.mrf, scale);
  auto r = solve_plane_mrf(pb, sz, static_cast<int>(out.planes.size()), cfg.mrf);
  out.labels = std::move(r.labels);
  out.energy = r.energy;
  return out;
}

inline LabelMap mws_segment(const DepthMap& depth, const RgbImage& image, std::span<const Plane> planes,
                            const CameraIntrinsics& k, const ManhattanFrame& frame, const MwsConfig& cfg) {
  return mws_segment_detailed(depth, image, planes, k, frame, cfg).labels;
}

}  // namespace planekit

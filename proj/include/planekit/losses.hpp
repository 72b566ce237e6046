#pragma once

// Training objectives of a piece-wise planar depth predictor, evaluated with
// analytic gradients:
//   * order-agnostic plane-parameter loss (squared distance of every
//     ground-truth plane to its nearest prediction),
//   * per-pixel cross entropy of the segmentation masks,
//   * probability-weighted squared depth error over all K+1 surfaces,
// plus gradient descent on plane parameters under the depth loss.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/image.hpp"

namespace planekit {

inline constexpr int kDefaultPlaneCapacity = 10;

/// Up to `capacity` planes (a prediction head emits a fixed number).
struct PlaneSet {
  std::vector<Plane> planes;
  int capacity = kDefaultPlaneCapacity;

  std::size_t size() const { return planes.size(); }
  void validate() const {
    if (planes.empty()) throw ValidationError("plane set must contain at least one plane");
    if (capacity < 1 || planes.size() > static_cast<std::size_t>(capacity)) {
      throw ValidationError("plane set exceeds its capacity");
    }
  }
  std::vector<Vec3> params() const {
    std::vector<Vec3> out;
    for (const auto& p : planes) out.push_back(p.param());
    return out;
  }
};

// ---------------------------------------------------------------------------
// Plane parameter loss

struct ChamferReport {
  double value = 0.0;
  std::vector<Vec3> grad;           ///< d value / d pred param, per prediction
  std::vector<std::size_t> match;   ///< nearest prediction per ground-truth plane
};

/// L = sum_i min_j |gt_i - pred_j|^2 over raw parameter vectors. Ties pick the
/// lowest j. Per-gt minima are summed in ascending order so the value is
/// exactly invariant to permutations of either input. With `symmetric`, the
/// reverse term sum_j min_i |pred_j - gt_i|^2 is added.
inline ChamferReport chamfer_plane_loss(std::span<const Vec3> gt, std::span<const Vec3> pred, bool symmetric = false) {
  require(!gt.empty() && !pred.empty(), "chamfer_plane_loss: both plane sets must be non-empty");
  ChamferReport r;
  r.grad.assign(pred.size(), Vec3::Zero());
  std::vector<double> terms;
  terms.reserve(gt.size() + (symmetric ? pred.size() : 0));
  for (std::size_t i = 0; i < gt.size(); ++i) {
    std::size_t best = 0;
    double best_d = (gt[i] - pred[0]).squaredNorm();
    for (std::size_t j = 1; j < pred.size(); ++j) {
      const double d = (gt[i] - pred[j]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    terms.push_back(best_d);
    r.match.push_back(best);
    r.grad[best] += 2.0 * (pred[best] - gt[i]);
  }
  if (symmetric) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      std::size_t best = 0;
      double best_d = (pred[j] - gt[0]).squaredNorm();
      for (std::size_t i = 1; i < gt.size(); ++i) {
        const double d = (pred[j] - gt[i]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      terms.push_back(best_d);
      r.grad[j] += 2.0 * (pred[j] - gt[best]);
    }
  }
  std::sort(terms.begin(), terms.end());
  r.value = std::accumulate(terms.begin(), terms.end(), 0.0);
  return r;
}

inline ChamferReport chamfer_plane_loss(const PlaneSet& gt, const PlaneSet& pred, bool symmetric = false) {
  const auto g = gt.params();
  const auto p = pred.params();
  return chamfer_plane_loss(std::span<const Vec3>(g), std::span<const Vec3>(p), symmetric);
}

// ---------------------------------------------------------------------------
// Segmentation loss

enum class SegmentationLossForm {
  cross_entropy,       ///< -sum_p log M_{gt(p)}
  printed_complement,  ///< sum_p log(1 - M_{gt(p)}), the formula as typeset
};

struct SegmentationReport {
  double value = 0.0;
  double mean = 0.0;              ///< value / pixel count
  std::vector<double> grad_logits;  ///< pixel-major, same layout as the mask stack
};

namespace detail {

inline void check_labels(const ProbMaskStack& masks, const LabelMap& gt) {
  require_same_size(masks.size(), gt.size(), "segmentation_loss: masks vs labels");
  for (std::size_t i = 0; i < gt.pixels(); ++i) {
    if (gt[i] < 0 || gt[i] >= masks.channels()) {
      throw LabelOutOfRange("segmentation_loss: label " + std::to_string(gt[i]) + " has no mask channel");
    }
  }
}

inline SegmentationReport segmentation_from_probs(const ProbMaskStack& m, const LabelMap& gt,
                                                  SegmentationLossForm form) {
  const int C = m.channels();
  SegmentationReport r;
  r.grad_logits.assign(m.data().size(), 0.0);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    const int g = gt[i];
    const double pg = m(i, g);
    double* grad = &r.grad_logits[i * static_cast<std::size_t>(C)];
    if (form == SegmentationLossForm::cross_entropy) {
      r.value -= std::log(std::max(pg, 1e-300));
      for (int c = 0; c < C; ++c) grad[c] = m(i, c) - (c == g ? 1.0 : 0.0);
    } else {
      const double rest = std::max(1.0 - pg, 1e-300);
      r.value += std::log(rest);
      // d log(1 - p_g) / d z_c = -p_g (delta_gc - p_c) / (1 - p_g)
      for (int c = 0; c < C; ++c) grad[c] = -pg * ((c == g ? 1.0 : 0.0) - m(i, c)) / rest;
    }
  }
  r.mean = m.pixels() ? r.value / static_cast<double>(m.pixels()) : 0.0;
  return r;
}

}  // namespace detail

/// Segmentation loss of normalised masks; gradients are with respect to the
/// pre-softmax logits that produced them.
inline SegmentationReport segmentation_loss(const ProbMaskStack& masks, const LabelMap& gt,
                                            SegmentationLossForm form = SegmentationLossForm::cross_entropy) {
  masks.require_normalized(1e-6);
  detail::check_labels(masks, gt);
  return detail::segmentation_from_probs(masks, gt, form);
}

/// Per-pixel softmax over channels.
inline ProbMaskStack softmax(const ProbMaskStack& logits) {
  ProbMaskStack out(logits.width(), logits.height(), logits.channels());
  const int C = logits.channels();
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    const double* z = logits.pixel(i);
    const double mx = *std::max_element(z, z + C);
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += (out(i, c) = std::exp(z[c] - mx));
    for (int c = 0; c < C; ++c) out(i, c) /= s;
  }
  return out;
}

/// Same loss, taking logits (the stack's values are unnormalised scores).
inline SegmentationReport segmentation_loss_from_logits(const ProbMaskStack& logits, const LabelMap& gt,
                                                        SegmentationLossForm form = SegmentationLossForm::cross_entropy) {
  detail::check_labels(logits, gt);
  const ProbMaskStack m = softmax(logits);
  if (form == SegmentationLossForm::cross_entropy) {
    // log-sum-exp form avoids log(softmax) underflow
    SegmentationReport r = detail::segmentation_from_probs(m, gt, form);
    r.value = 0.0;
    const int C = logits.channels();
    for (std::size_t i = 0; i < logits.pixels(); ++i) {
      const double* z = logits.pixel(i);
      const double mx = *std::max_element(z, z + C);
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += std::exp(z[c] - mx);
      r.value += mx + std::log(s) - z[gt[i]];
    }
    r.mean = logits.pixels() ? r.value / static_cast<double>(logits.pixels()) : 0.0;
    return r;
  }
  return detail::segmentation_from_probs(m, gt, form);
}

// ---------------------------------------------------------------------------
// Probability-weighted depth loss

struct DepthLossConfig {
  /// Residual charged where a plane has no depth along the pixel's ray.
  double undefined_residual = 10.0;
};

struct DepthLossReport {
  double value = 0.0;
  double mean = 0.0;  ///< value / number of valid ground-truth pixels
  std::size_t valid_pixels = 0;
  std::vector<Vec3> grad_planes;      ///< d value / d P_j
  std::vector<double> grad_nonplanar;  ///< per pixel
  std::vector<double> grad_masks;      ///< pixel-major, K+1 channels
};

/// Depth of the plane with raw parameter P along ray r: z = |P|^2 / (P.r), with
/// gradient dz/dP = (2P - z r) / (P.r). Empty when n.r <= kMinRayDot.
struct PlaneRayDepth {
  double z;
  Vec3 dz_dp;
};

inline std::optional<PlaneRayDepth> plane_ray_depth(const Vec3& param, const Vec3& ray) {
  const double pp = param.squaredNorm();
  const double pr = param.dot(ray);
  const double norm = std::sqrt(pp);
  if (!(norm > 0.0) || !(pr > kMinRayDot * norm)) return std::nullopt;
  const double z = pp / pr;
  return PlaneRayDepth{z, (2.0 * param - z * ray) / pr};
}

/// L = sum_i sum_p M_i(p) (D_i(p) - D*(p))^2 over valid ground-truth pixels,
/// with D_i the plane-induced depth for i < K and the non-planar map for i = K.
/// Raw parameter vectors are differentiated directly (no validity checks), so
/// callers may probe with finite differences.
inline DepthLossReport weighted_depth_loss(const ProbMaskStack& masks, std::span<const Vec3> plane_params,
                                           const DepthMap& nonplanar, const DepthMap& gt, const CameraIntrinsics& k,
                                           const DepthLossConfig& cfg = {}) {
  const int K = static_cast<int>(plane_params.size());
  const int C = masks.channels();
  if (C != K + 1) throw DimensionMismatch("weighted_depth_loss: masks need K+1 channels");
  require_same_size(masks.size(), gt.size(), "weighted_depth_loss: masks vs gt");
  require_same_size(nonplanar.size(), gt.size(), "weighted_depth_loss: nonplanar vs gt");
  require_same_size(gt.size(), k.size(), "weighted_depth_loss: gt vs intrinsics");

  DepthLossReport r;
  r.grad_planes.assign(static_cast<std::size_t>(K), Vec3::Zero());
  r.grad_nonplanar.assign(gt.pixels(), 0.0);
  r.grad_masks.assign(masks.data().size(), 0.0);
  const double undefined_sq = cfg.undefined_residual * cfg.undefined_residual;

  for (int v = 0; v < gt.height(); ++v) {
    for (int u = 0; u < gt.width(); ++u) {
      const std::size_t i = gt.size().index(u, v);
      if (!gt.valid(i)) continue;
      ++r.valid_pixels;
      const double target = gt.depth(i);
      const Vec3 ray = k.ray(u, v);
      double pixel_sum = 0.0;
      for (int j = 0; j < K; ++j) {
        const double w = masks(i, j);
        double sq;
        if (auto pd = plane_ray_depth(plane_params[j], ray)) {
          const double res = pd->z - target;
          sq = res * res;
          r.grad_planes[j] += (2.0 * w * res) * pd->dz_dp;
        } else {
          sq = undefined_sq;
        }
        pixel_sum += w * sq;
        r.grad_masks[i * static_cast<std::size_t>(C) + j] = sq;
      }
      const double w = masks(i, K);
      double sq;
      if (nonplanar.valid(i)) {
        const double res = nonplanar.depth(i) - target;
        sq = res * res;
        r.grad_nonplanar[i] = 2.0 * w * res;
      } else {
        sq = undefined_sq;
      }
      pixel_sum += w * sq;
      r.grad_masks[i * static_cast<std::size_t>(C) + K] = sq;
      r.value += pixel_sum;
    }
  }
  r.mean = r.valid_pixels ? r.value / static_cast<double>(r.valid_pixels) : 0.0;
  return r;
}

inline DepthLossReport weighted_depth_loss(const ProbMaskStack& masks, const PlaneSet& planes,
                                           const DepthMap& nonplanar, const DepthMap& gt, const CameraIntrinsics& k,
                                           const DepthLossConfig& cfg = {}) {
  const auto params = planes.params();
  return weighted_depth_loss(masks, std::span<const Vec3>(params), nonplanar, gt, k, cfg);
}

struct RefineResult {
  PlaneSet planes;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_taken = 0;
};

/// Fixed-step gradient descent on the plane parameters under the weighted
/// depth loss. A step that would raise the loss (or produce a degenerate
/// plane) is retried with half the step, at most `max_halvings` times;
/// otherwise the planes stay put for that step. Final loss <= initial loss.
inline RefineResult refine_planes(const PlaneSet& init, const ProbMaskStack& masks, const DepthMap& nonplanar,
                                  const DepthMap& gt, const CameraIntrinsics& k, int steps, double step_size,
                                  int max_halvings = 20, const DepthLossConfig& cfg = {}) {
  init.validate();
  require(steps >= 0 && step_size > 0.0, "refine_planes: steps >= 0 and step_size > 0 required");
  std::vector<Vec3> params = init.params();
  auto loss_of = [&](std::span<const Vec3> p) { return weighted_depth_loss(masks, p, nonplanar, gt, k, cfg); };
  DepthLossReport cur = loss_of(params);
  RefineResult out;
  out.initial_loss = cur.value;
  for (int s = 0; s < steps; ++s) {
    double grad_norm = 0.0;
    for (const auto& g : cur.grad_planes) grad_norm += g.squaredNorm();
    if (grad_norm == 0.0) break;
    double h = step_size;
    bool moved = false;
    for (int attempt = 0; attempt <= max_halvings; ++attempt, h *= 0.5) {
      std::vector<Vec3> trial = params;
      bool ok = true;
      for (std::size_t j = 0; j < trial.size(); ++j) {
        trial[j] -= h * cur.grad_planes[j];
        ok &= trial[j].allFinite() && trial[j].norm() > kMinPlaneOffset;
      }
      if (!ok) continue;
      DepthLossReport next = loss_of(trial);
      if (next.value <= cur.value) {
        params = std::move(trial);
        cur = std::move(next);
        moved = true;
        break;
      }
    }
    if (!moved) break;
    out.steps_taken = s + 1;
  }
  out.planes.capacity = init.capacity;
  for (std::size_t j = 0; j < params.size(); ++j) {
    // untouched planes keep their exact (normal, offset) encoding
    out.planes.planes.push_back(params[j] == init.planes[j].param() ? init.planes[j] : Plane::from_param(params[j]));
  }
  out.final_loss = cur.value;
  return out;
}

}  // namespace planekit

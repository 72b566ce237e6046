#pragma once

// Plane and pixel recall under an IOU gate plus a mean-depth-difference
// threshold, and the standard single-image depth error statistics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/image.hpp"

namespace planekit {

struct PlaneMatch {
  std::size_t gt_index = 0;
  std::size_t pred_index = 0;
  double iou = 0.0;
  double mean_depth_diff = 0.0;    ///< metres, over intersection pixels
  std::size_t intersection = 0;    ///< pixel count
};

enum class MatchMode {
  one_to_one,  ///< each prediction validates at most one ground-truth plane
  permissive,  ///< a prediction may validate several ground-truth planes
};

struct MatchConfig {
  double min_iou = 0.5;  ///< strict lower bound
  MatchMode mode = MatchMode::one_to_one;
};

/// Binary plane masks (one byte per pixel) with their plane parameters.
struct PlaneMasks {
  ImageSize size;
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<Plane> planes;

  static PlaneMasks from_labels(const LabelMap& labels, std::span<const Plane> planes) {
    require(static_cast<std::size_t>(labels.num_planes()) == planes.size(), "label map plane count vs plane list");
    PlaneMasks out{labels.size(), {}, {planes.begin(), planes.end()}};
    out.masks.assign(planes.size(), std::vector<std::uint8_t>(labels.pixels(), 0));
    for (std::size_t i = 0; i < labels.pixels(); ++i) {
      if (labels.planar(i)) out.masks[static_cast<std::size_t>(labels[i])][i] = 1;
    }
    return out;
  }

  std::size_t area(std::size_t j) const {
    return static_cast<std::size_t>(std::count(masks[j].begin(), masks[j].end(), std::uint8_t{1}));
  }

  /// Pixels covered by at least one plane.
  std::size_t planar_pixels() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size.pixels(); ++i) {
      bool any = false;
      for (const auto& m : masks) any |= m[i] != 0;
      n += any;
    }
    return n;
  }
};

/// Greedy matching: ground-truth planes in descending area order (ties to the
/// lower index) each take the available prediction with the highest IOU above
/// the gate (ties to the lower index). The depth difference is the mean over
/// the intersection of |plane-induced depth difference|, skipping pixels where
/// either plane has no depth; infinity when no pixel qualifies.
inline std::vector<PlaneMatch> match_planes(const PlaneMasks& gt, const PlaneMasks& pred, const CameraIntrinsics& k,
                                            const MatchConfig& cfg = {}) {
  require_same_size(gt.size, pred.size, "match_planes: gt vs pred");
  require_same_size(gt.size, k.size(), "match_planes: masks vs intrinsics");
  const std::size_t G = gt.masks.size(), P = pred.masks.size();
  const std::size_t N = gt.size.pixels();

  std::vector<std::size_t> gt_area(G), pred_area(P);
  for (std::size_t g = 0; g < G; ++g) gt_area[g] = gt.area(g);
  for (std::size_t p = 0; p < P; ++p) pred_area[p] = pred.area(p);

  std::vector<std::size_t> order(G);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gt_area[a] > gt_area[b]; });

  std::vector<bool> used(P, false);
  std::vector<PlaneMatch> out;
  for (std::size_t g : order) {
    if (gt_area[g] == 0) continue;
    std::optional<std::size_t> best;
    double best_iou = cfg.min_iou;
    std::size_t best_inter = 0;
    for (std::size_t p = 0; p < P; ++p) {
      if (cfg.mode == MatchMode::one_to_one && used[p]) continue;
      std::size_t inter = 0;
      const auto& gm = gt.masks[g];
      const auto& pm = pred.masks[p];
      for (std::size_t i = 0; i < N; ++i) inter += (gm[i] & pm[i]);
      const std::size_t uni = gt_area[g] + pred_area[p] - inter;
      const double iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
      if (iou > best_iou) {
        best_iou = iou;
        best = p;
        best_inter = inter;
      }
    }
    if (!best) continue;
    used[*best] = true;
    double sum = 0.0;
    std::size_t cnt = 0;
    const auto& gm = gt.masks[g];
    const auto& pm = pred.masks[*best];
    for (int v = 0; v < gt.size.height; ++v) {
      for (int u = 0; u < gt.size.width; ++u) {
        const std::size_t i = gt.size.index(u, v);
        if (!(gm[i] && pm[i])) continue;
        auto zg = plane_depth(gt.planes[g], u, v, k);
        auto zp = plane_depth(pred.planes[*best], u, v, k);
        if (!zg || !zp) continue;
        sum += std::abs(*zg - *zp);
        ++cnt;
      }
    }
    out.push_back({g, *best, best_iou, cnt ? sum / static_cast<double>(cnt) : std::numeric_limits<double>::infinity(),
                   best_inter});
  }
  return out;
}

inline std::vector<PlaneMatch> match_planes(const LabelMap& gt_labels, std::span<const Plane> gt_planes,
                                            const LabelMap& pred_labels, std::span<const Plane> pred_planes,
                                            const CameraIntrinsics& k, const MatchConfig& cfg = {}) {
  return match_planes(PlaneMasks::from_labels(gt_labels, gt_planes), PlaneMasks::from_labels(pred_labels, pred_planes),
                      k, cfg);
}

/// 0, 0.05, ..., 0.60 metres.
inline std::vector<double> default_recall_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 12; ++i) t.push_back(i * 0.05);
  return t;
}

struct RecallCurve {
  std::vector<double> thresholds;
  std::vector<double> plane_recall;
  std::vector<double> pixel_recall;
};

/// Numerators and denominators of the recall curves; images are combined by
/// adding counts (micro average) while per-image curves are kept for the
/// macro average.
class RecallAccumulator {
public:
  explicit RecallAccumulator(std::vector<double> thresholds = default_recall_thresholds())
      : thresholds_(std::move(thresholds)),
        matched_planes_(thresholds_.size(), 0),
        matched_pixels_(thresholds_.size(), 0) {
    for (std::size_t i = 1; i < thresholds_.size(); ++i) {
      require(thresholds_[i] >= thresholds_[i - 1], "recall thresholds must be ascending");
    }
  }

  /// Adds one image: its matches, ground-truth plane count and planar pixel count.
  void add(std::span<const PlaneMatch> matches, std::size_t gt_planes, std::size_t gt_planar_pixels) {
    RecallCurve single;
    single.thresholds = thresholds_;
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
      std::size_t np = 0, px = 0;
      for (const auto& m : matches) {
        if (m.mean_depth_diff <= thresholds_[t]) {
          ++np;
          px += m.intersection;
        }
      }
      matched_planes_[t] += np;
      matched_pixels_[t] += px;
      single.plane_recall.push_back(gt_planes ? static_cast<double>(np) / static_cast<double>(gt_planes) : 0.0);
      single.pixel_recall.push_back(gt_planar_pixels ? static_cast<double>(px) / static_cast<double>(gt_planar_pixels) : 0.0);
    }
    total_planes_ += gt_planes;
    total_pixels_ += gt_planar_pixels;
    per_image_.push_back(std::move(single));
  }

  RecallCurve micro() const {
    RecallCurve c;
    c.thresholds = thresholds_;
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
      c.plane_recall.push_back(total_planes_ ? static_cast<double>(matched_planes_[t]) / static_cast<double>(total_planes_) : 0.0);
      c.pixel_recall.push_back(total_pixels_ ? static_cast<double>(matched_pixels_[t]) / static_cast<double>(total_pixels_) : 0.0);
    }
    return c;
  }

  RecallCurve macro() const {
    RecallCurve c;
    c.thresholds = thresholds_;
    c.plane_recall.assign(thresholds_.size(), 0.0);
    c.pixel_recall.assign(thresholds_.size(), 0.0);
    if (per_image_.empty()) return c;
    for (const auto& img : per_image_) {
      for (std::size_t t = 0; t < thresholds_.size(); ++t) {
        c.plane_recall[t] += img.plane_recall[t];
        c.pixel_recall[t] += img.pixel_recall[t];
      }
    }
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
      c.plane_recall[t] /= static_cast<double>(per_image_.size());
      c.pixel_recall[t] /= static_cast<double>(per_image_.size());
    }
    return c;
  }

  std::size_t images() const { return per_image_.size(); }

private:
  std::vector<double> thresholds_;
  std::vector<std::size_t> matched_planes_, matched_pixels_;
  std::size_t total_planes_ = 0, total_pixels_ = 0;
  std::vector<RecallCurve> per_image_;
};

/// Single-image curves: plane recall counts matches with depth difference <= t
/// over the ground-truth plane count; pixel recall sums their intersections
/// over the ground-truth planar pixels.
inline RecallCurve recall_curves(std::span<const PlaneMatch> matches, const PlaneMasks& gt,
                                 std::vector<double> thresholds = default_recall_thresholds()) {
  RecallAccumulator acc(std::move(thresholds));
  std::size_t planes = 0;
  for (std::size_t g = 0; g < gt.masks.size(); ++g) planes += gt.area(g) > 0;
  acc.add(matches, planes, gt.planar_pixels());
  return acc.micro();
}

// ---------------------------------------------------------------------------
// Depth statistics

struct DepthStats {
  double rel = 0.0;
  double rel_sqr = 0.0;
  double log10 = 0.0;
  double rmse_lin = 0.0;
  double rmse_log = 0.0;
  double delta_1 = 0.0;  ///< percent
  double delta_2 = 0.0;
  double delta_3 = 0.0;
  std::size_t pixels = 0;
};

/// Running sums behind DepthStats, so several images can be pooled.
class DepthStatsAccumulator {
public:
  void add(double pred, double gt) {
    if (!(pred > 0.0) || !(gt > 0.0)) throw NonPositiveDepth("depth statistics need positive depths");
    const double diff = pred - gt;
    rel_ += std::abs(diff) / gt;
    rel_sqr_ += diff * diff / gt;
    log10_ += std::abs(std::log10(pred) - std::log10(gt));
    sq_ += diff * diff;
    const double ld = std::log(pred) - std::log(gt);
    sq_log_ += ld * ld;
    const double ratio = std::max(pred / gt, gt / pred);
    d1_ += ratio < 1.25;
    d2_ += ratio < 1.25 * 1.25;
    d3_ += ratio < 1.25 * 1.25 * 1.25;
    ++n_;
  }

  void add(const DepthMap& pred, const DepthMap& gt, std::span<const std::uint8_t> region = {}) {
    require_same_size(pred.size(), gt.size(), "depth_stats: pred vs gt");
    require(region.empty() || region.size() == gt.pixels(), "depth_stats: region mask size");
    for (std::size_t i = 0; i < gt.pixels(); ++i) {
      if (!region.empty() && !region[i]) continue;
      if (!pred.valid(i) || !gt.valid(i)) continue;
      add(pred.depth(i), gt.depth(i));
    }
  }

  std::size_t count() const { return n_; }

  DepthStats stats() const {
    if (n_ == 0) throw EmptyRegion("no valid pixels to evaluate");
    const double n = static_cast<double>(n_);
    DepthStats s;
    s.rel = rel_ / n;
    s.rel_sqr = rel_sqr_ / n;
    s.log10 = log10_ / n;
    s.rmse_lin = std::sqrt(sq_ / n);
    s.rmse_log = std::sqrt(sq_log_ / n);
    s.delta_1 = 100.0 * static_cast<double>(d1_) / n;
    s.delta_2 = 100.0 * static_cast<double>(d2_) / n;
    s.delta_3 = 100.0 * static_cast<double>(d3_) / n;
    s.pixels = n_;
    return s;
  }

private:
  double rel_ = 0, rel_sqr_ = 0, log10_ = 0, sq_ = 0, sq_log_ = 0;
  std::size_t d1_ = 0, d2_ = 0, d3_ = 0, n_ = 0;
};

/// Statistics over pixels valid in both maps.
inline DepthStats depth_stats(const DepthMap& pred, const DepthMap& gt) {
  DepthStatsAccumulator acc;
  acc.add(pred, gt);
  return acc.stats();
}

/// Pixels whose ground-truth label is a plane.
inline std::vector<std::uint8_t> planar_region(const LabelMap& labels) {
  std::vector<std::uint8_t> m(labels.pixels(), 0);
  for (std::size_t i = 0; i < labels.pixels(); ++i) m[i] = labels.planar(i);
  return m;
}

/// Pixels within `band` pixels (Euclidean) of a label boundary, where a
/// boundary pixel has a 4-neighbour with a different label.
inline std::vector<std::uint8_t> edge_region(const LabelMap& labels, int band = 5) {
  const ImageSize sz = labels.size();
  std::vector<std::uint8_t> boundary(labels.pixels(), 0);
  for (int v = 0; v < sz.height; ++v) {
    for (int u = 0; u < sz.width; ++u) {
      const int l = labels.at(u, v);
      const bool b = (u > 0 && labels.at(u - 1, v) != l) || (u + 1 < sz.width && labels.at(u + 1, v) != l) ||
                     (v > 0 && labels.at(u, v - 1) != l) || (v + 1 < sz.height && labels.at(u, v + 1) != l);
      boundary[sz.index(u, v)] = b;
    }
  }
  std::vector<std::uint8_t> out(labels.pixels(), 0);
  for (int v = 0; v < sz.height; ++v) {
    for (int u = 0; u < sz.width; ++u) {
      if (!boundary[sz.index(u, v)]) continue;
      for (int dv = -band; dv <= band; ++dv) {
        for (int du = -band; du <= band; ++du) {
          if (du * du + dv * dv > band * band || !sz.contains(u + du, v + dv)) continue;
          out[sz.index(u + du, v + dv)] = 1;
        }
      }
    }
  }
  return out;
}

inline DepthStats planar_region_stats(const DepthMap& pred, const DepthMap& gt, const LabelMap& gt_labels) {
  require_same_size(gt.size(), gt_labels.size(), "planar_region_stats: depth vs labels");
  const auto region = planar_region(gt_labels);
  DepthStatsAccumulator acc;
  acc.add(pred, gt, region);
  return acc.stats();
}

inline DepthStats edge_region_stats(const DepthMap& pred, const DepthMap& gt, const LabelMap& gt_labels, int band = 5) {
  require_same_size(gt.size(), gt_labels.size(), "edge_region_stats: depth vs labels");
  const auto region = edge_region(gt_labels, band);
  DepthStatsAccumulator acc;
  acc.add(pred, gt, region);
  return acc.stats();
}

/// Depth map of a segmentation: plane-induced depth on plane pixels and the
/// fallback map (if any) elsewhere.
inline DepthMap piecewise_depth(const LabelMap& labels, std::span<const Plane> planes, const CameraIntrinsics& k,
                                const DepthMap* nonplanar = nullptr) {
  require_same_size(labels.size(), k.size(), "piecewise_depth: labels vs intrinsics");
  DepthMap out(labels.width(), labels.height());
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      const std::size_t i = labels.size().index(u, v);
      if (labels.planar(i)) {
        if (auto z = plane_depth(planes[static_cast<std::size_t>(labels[i])], u, v, k)) out.set(i, *z);
      } else if (nonplanar && nonplanar->valid(i)) {
        out.set(i, nonplanar->depth(i));
      }
    }
  }
  return out;
}

}  // namespace planekit

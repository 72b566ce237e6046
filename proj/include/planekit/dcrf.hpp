#pragma once

// Mean-field inference for a fully connected CRF over probabilistic plane
// masks: Potts compatibility, one spatial and one bilateral Gaussian kernel.
// Small images use exact O(N^2) message passing; larger ones use windows
// truncated at 3 sigma, with the wide bilateral window sampled on a lattice.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "planekit/image.hpp"
#include "planekit/parallel.hpp"

namespace planekit {

enum class DcrfMode { automatic, exact, truncated };

struct DcrfConfig {
  int iterations = 10;  ///< 5 is the training-time setting
  double spatial_sigma = 3.0;
  double bilateral_spatial_sigma = 60.0;
  double bilateral_color_sigma = 10.0;
  double spatial_weight = 3.0;
  double bilateral_weight = 10.0;
  DcrfMode mode = DcrfMode::automatic;
  /// Exact message passing up to this many pixels (128 x 96) in automatic mode.
  std::size_t exact_max_pixels = 128 * 96;
  /// Lattice samples per axis across a truncated bilateral window.
  int samples_per_axis = 64;
  int threads = 1;

  void validate() const {
    if (iterations < 0) throw InvalidConfig("dcrf: iterations must be >= 0");
    if (!(spatial_sigma > 0.0 && bilateral_spatial_sigma > 0.0 && bilateral_color_sigma > 0.0)) {
      throw InvalidConfig("dcrf: kernel bandwidths must be positive");
    }
    if (!(spatial_weight >= 0.0 && bilateral_weight >= 0.0)) throw InvalidConfig("dcrf: kernel weights must be >= 0");
    if (samples_per_axis < 1) throw InvalidConfig("dcrf: samples_per_axis must be >= 1");
  }
};

inline constexpr double kMaskClamp = 1e-8;

namespace detail {

struct KernelTables {
  std::vector<double> spatial_x, spatial_y, bilateral_x, bilateral_y;  // indexed by |offset|
  std::array<double, 256> color{};

  KernelTables(const DcrfConfig& cfg, int width, int height) {
    auto gauss = [](double d, double sigma) { return std::exp(-d * d / (2.0 * sigma * sigma)); };
    for (int d = 0; d < width; ++d) {
      spatial_x.push_back(gauss(d, cfg.spatial_sigma));
      bilateral_x.push_back(gauss(d, cfg.bilateral_spatial_sigma));
    }
    for (int d = 0; d < height; ++d) {
      spatial_y.push_back(gauss(d, cfg.spatial_sigma));
      bilateral_y.push_back(gauss(d, cfg.bilateral_spatial_sigma));
    }
    for (int d = 0; d < 256; ++d) color[d] = gauss(d, cfg.bilateral_color_sigma);
  }

  double color_term(const Rgb& a, const Rgb& b) const {
    return color[std::abs(a[0] - b[0])] * color[std::abs(a[1] - b[1])] * color[std::abs(a[2] - b[2])];
  }
};

}  // namespace detail

/// Refines `masks` by `cfg.iterations` mean-field updates. The unary is
/// -log(mask) with masks clamped to [1e-8, 1]; every iteration ends with a
/// per-pixel renormalisation. `on_iteration(it, q)` observes each iterate.
inline ProbMaskStack dcrf_refine(const ProbMaskStack& masks, const RgbImage& image, const DcrfConfig& cfg,
                                 const std::function<void(int, const ProbMaskStack&)>& on_iteration = {}) {
  cfg.validate();
  require_same_size(masks.size(), image.size(), "dcrf_refine: masks vs image");
  masks.require_normalized(1e-6);
  if (cfg.iterations == 0) return masks;

  const int C = masks.channels();
  const int W = masks.width(), H = masks.height();
  const std::size_t N = masks.pixels();

  std::vector<double> unary(N * static_cast<std::size_t>(C));
  for (std::size_t i = 0; i < unary.size(); ++i) unary[i] = -std::log(std::clamp(masks.data()[i], kMaskClamp, 1.0));

  const bool exact = cfg.mode == DcrfMode::exact || (cfg.mode == DcrfMode::automatic && N <= cfg.exact_max_pixels);
  const detail::KernelTables tab(cfg, W, H);

  // Window geometry for the truncated variant.
  const int rs = static_cast<int>(std::ceil(3.0 * cfg.spatial_sigma));
  const int rb = static_cast<int>(std::ceil(3.0 * cfg.bilateral_spatial_sigma));
  const int stride = std::max(1, static_cast<int>(std::ceil(2.0 * rb / cfg.samples_per_axis)));
  const double lattice_weight = static_cast<double>(stride) * stride;

  auto softmax_into = [&](std::size_t i, const double* msg, double* out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      out[c] = -unary[i * C + c] + msg[c];
      mx = std::max(mx, out[c]);
    }
    double s = 0.0;
    for (int c = 0; c < C; ++c) {
      out[c] = std::exp(out[c] - mx);
      s += out[c];
    }
    for (int c = 0; c < C; ++c) out[c] /= s;
  };

  ProbMaskStack q(W, H, C);
  {
    std::vector<double> zero(static_cast<std::size_t>(C), 0.0);
    for (std::size_t i = 0; i < N; ++i) softmax_into(i, zero.data(), q.pixel(i));
  }

  ProbMaskStack next(W, H, C);
  for (int it = 0; it < cfg.iterations; ++it) {
    parallel_for(N, cfg.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> msg(static_cast<std::size_t>(C));
      for (std::size_t i = begin; i < end; ++i) {
        std::fill(msg.begin(), msg.end(), 0.0);
        const int ui = static_cast<int>(i % static_cast<std::size_t>(W));
        const int vi = static_cast<int>(i / static_cast<std::size_t>(W));
        const Rgb& ci = image[i];
        auto accumulate = [&](int uj, int vj, double k) {
          const double* qj = q.pixel(static_cast<std::size_t>(vj) * W + uj);
          for (int c = 0; c < C; ++c) msg[c] += k * qj[c];
        };
        if (exact) {
          for (int vj = 0; vj < H; ++vj) {
            const int dy = std::abs(vj - vi);
            const double sy = cfg.spatial_weight * tab.spatial_y[dy];
            const double by = cfg.bilateral_weight * tab.bilateral_y[dy];
            for (int uj = 0; uj < W; ++uj) {
              if (uj == ui && vj == vi) continue;
              const int dx = std::abs(uj - ui);
              const double k = sy * tab.spatial_x[dx] +
                               by * tab.bilateral_x[dx] * tab.color_term(ci, image[static_cast<std::size_t>(vj) * W + uj]);
              accumulate(uj, vj, k);
            }
          }
        } else {
          if (cfg.spatial_weight > 0.0) {
            for (int vj = std::max(0, vi - rs); vj <= std::min(H - 1, vi + rs); ++vj) {
              for (int uj = std::max(0, ui - rs); uj <= std::min(W - 1, ui + rs); ++uj) {
                if (uj == ui && vj == vi) continue;
                accumulate(uj, vj, cfg.spatial_weight * tab.spatial_y[std::abs(vj - vi)] * tab.spatial_x[std::abs(uj - ui)]);
              }
            }
          }
          if (cfg.bilateral_weight > 0.0) {
            const int ky = std::min(rb, std::max(vi, H - 1 - vi)) / stride;
            const int kx = std::min(rb, std::max(ui, W - 1 - ui)) / stride;
            for (int sy = -ky; sy <= ky; ++sy) {
              const int vj = vi + sy * stride;
              if (vj < 0 || vj >= H) continue;
              const double by = cfg.bilateral_weight * lattice_weight * tab.bilateral_y[std::abs(vj - vi)];
              for (int sx = -kx; sx <= kx; ++sx) {
                const int uj = ui + sx * stride;
                if (uj < 0 || uj >= W || (sx == 0 && sy == 0)) continue;
                accumulate(uj, vj,
                           by * tab.bilateral_x[std::abs(uj - ui)] *
                               tab.color_term(ci, image[static_cast<std::size_t>(vj) * W + uj]));
              }
            }
          }
        }
        softmax_into(i, msg.data(), next.pixel(i));
      }
    });
    std::swap(q, next);
    if (on_iteration) on_iteration(it, q);
  }
  return q;
}

/// Winner-takes-all labels; ties go to the lowest channel. The last channel
/// is the non-planar label.
inline LabelMap masks_to_labels(const ProbMaskStack& masks) {
  const int C = masks.channels();
  LabelMap out(masks.width(), masks.height(), C - 1);
  for (std::size_t i = 0; i < masks.pixels(); ++i) {
    const double* p = masks.pixel(i);
    int best = 0;
    for (int c = 1; c < C; ++c) {
      if (p[c] > p[best]) best = c;
    }
    out.set(i, best);
  }
  return out;
}

}  // namespace planekit

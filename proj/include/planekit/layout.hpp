#pragma once

// Box-room layout from a plane set with ceiling / floor / wall roles: each
// visibility configuration is projected by first exit from the room interior
// and scored against a winner-takes-all segmentation.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "planekit/dcrf.hpp"
#include "planekit/geometry.hpp"
#include "planekit/image.hpp"

namespace planekit {

enum class Role : int { ceiling = 0, floor = 1, wall_left = 2, wall_middle = 3, wall_right = 4 };
inline constexpr int kNumRoles = 5;
/// Role-map value for pixels outside every role surface.
inline constexpr int kNoRole = kNumRoles;

inline constexpr std::array<std::string_view, kNumRoles> kRoleNames = {"ceiling", "floor", "wall_left", "wall_middle",
                                                                       "wall_right"};

inline std::optional<Role> role_from_name(std::string_view name) {
  for (int r = 0; r < kNumRoles; ++r) {
    if (kRoleNames[r] == name) return static_cast<Role>(r);
  }
  return std::nullopt;
}

/// Plane index per role (absent when the role has no plane).
struct RoleAssignment {
  std::array<std::optional<std::size_t>, kNumRoles> plane{};

  std::optional<std::size_t>& operator[](Role r) { return plane[static_cast<int>(r)]; }
  const std::optional<std::size_t>& operator[](Role r) const { return plane[static_cast<int>(r)]; }

  /// Role of plane `index`, if any.
  std::optional<Role> role_of(std::size_t index) const {
    for (int r = 0; r < kNumRoles; ++r) {
      if (plane[r] && *plane[r] == index) return static_cast<Role>(r);
    }
    return std::nullopt;
  }

  void validate(std::size_t num_planes) const {
    for (int r = 0; r < kNumRoles; ++r) {
      if (!plane[r]) continue;
      if (*plane[r] >= num_planes) throw InvalidConfig("role assignment: plane index out of range");
      for (int s = r + 1; s < kNumRoles; ++s) {
        if (plane[s] && *plane[s] == *plane[r]) throw InvalidConfig("role assignment: plane used by two roles");
      }
    }
  }
};

/// Subset of roles declared visible, as a bit mask over Role values.
struct LayoutConfiguration {
  unsigned mask = 0;

  bool has(Role r) const { return (mask >> static_cast<int>(r)) & 1U; }
  int count() const { return std::popcount(mask); }
  bool operator==(const LayoutConfiguration&) const = default;

  std::string name() const {
    std::string s;
    for (int r = 0; r < kNumRoles; ++r) {
      if (!has(static_cast<Role>(r))) continue;
      if (!s.empty()) s += '+';
      s += kRoleNames[r];
    }
    return s.empty() ? "none" : s;
  }

  static LayoutConfiguration of(std::initializer_list<Role> roles) {
    LayoutConfiguration c;
    for (Role r : roles) c.mask |= 1U << static_cast<int>(r);
    return c;
  }
};

/// Whether `c` is a box-room visibility pattern: at least one of floor,
/// ceiling or middle wall, and visible walls contiguous (no left+right
/// without the middle).
inline bool is_valid_configuration(LayoutConfiguration c) {
  if (c.mask == 0 || c.mask >= (1U << kNumRoles)) return false;
  if (!(c.has(Role::floor) || c.has(Role::ceiling) || c.has(Role::wall_middle))) return false;
  if (c.has(Role::wall_left) && c.has(Role::wall_right) && !c.has(Role::wall_middle)) return false;
  return true;
}

/// Every valid configuration, ordered by number of visible roles, then mask.
inline const std::vector<LayoutConfiguration>& layout_catalog() {
  static const std::vector<LayoutConfiguration> catalog = [] {
    std::vector<LayoutConfiguration> out;
    for (unsigned m = 1; m < (1U << kNumRoles); ++m) {
      if (is_valid_configuration({m})) out.push_back({m});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](LayoutConfiguration a, LayoutConfiguration b) { return a.count() < b.count(); });
    return out;
  }();
  return catalog;
}

/// Role map: each pixel takes the visible role whose plane has the smallest
/// positive depth along the pixel ray (first exit from the room interior).
/// Pixels where no visible plane has a depth take the middle wall when it is
/// visible, else the role (among all assigned ones) with the smallest depth,
/// else the first visible role.
inline LabelMap project_layout(std::span<const Plane> planes, const RoleAssignment& roles, LayoutConfiguration config,
                               const CameraIntrinsics& k) {
  k.validate();
  if (!is_valid_configuration(config)) throw InvalidConfig("layout: '" + config.name() + "' is not a box-room configuration");
  roles.validate(planes.size());
  for (int r = 0; r < kNumRoles; ++r) {
    if (config.has(static_cast<Role>(r)) && !roles.plane[r]) {
      throw InvalidConfig(std::string("layout: no plane assigned to visible role ") + std::string(kRoleNames[r]));
    }
  }
  LabelMap out(k.width, k.height, kNumRoles);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      std::optional<int> best;
      double best_z = std::numeric_limits<double>::infinity();
      for (int r = 0; r < kNumRoles; ++r) {
        if (!config.has(static_cast<Role>(r))) continue;
        auto z = plane_depth(planes[*roles.plane[r]], u, v, k);
        if (z && *z < best_z) {
          best_z = *z;
          best = r;
        }
      }
      if (!best) {
        if (config.has(Role::wall_middle)) {
          best = static_cast<int>(Role::wall_middle);
        } else {
          for (int r = 0; r < kNumRoles; ++r) {
            if (!roles.plane[r]) continue;
            auto z = plane_depth(planes[*roles.plane[r]], u, v, k);
            if (z && *z < best_z) {
              best_z = *z;
              best = r;
            }
          }
          if (!best) {
            for (int r = 0; r < kNumRoles && !best; ++r) {
              if (config.has(static_cast<Role>(r))) best = r;
            }
          }
        }
      }
      out.set(u, v, *best);
    }
  }
  return out;
}

struct LayoutResult {
  LabelMap roles;  ///< per-pixel Role values
  LayoutConfiguration configuration;
  std::size_t score = 0;  ///< pixels where layout and segmentation agree
  std::vector<std::size_t> catalog_scores;
};

/// Role of each pixel's winner-takes-all plane, or kNoRole for non-role
/// planes and the non-planar channel.
inline LabelMap segmentation_roles(const ProbMaskStack& masks, const RoleAssignment& roles) {
  const LabelMap wta = masks_to_labels(masks);
  LabelMap out(masks.width(), masks.height(), kNumRoles);
  for (std::size_t i = 0; i < wta.pixels(); ++i) {
    if (!wta.planar(i)) continue;
    if (auto r = roles.role_of(static_cast<std::size_t>(wta[i]))) out.set(i, static_cast<int>(*r));
  }
  return out;
}

/// Scores every catalog configuration whose roles all have planes and
/// returns the best (ties to the earlier catalog entry, i.e. fewer roles).
inline LayoutResult estimate_layout(std::span<const Plane> planes, const RoleAssignment& roles,
                                    const ProbMaskStack& masks, const CameraIntrinsics& k) {
  require_same_size(masks.size(), k.size(), "estimate_layout: masks vs intrinsics");
  if (static_cast<std::size_t>(masks.channels()) != planes.size() + 1) {
    throw DimensionMismatch("estimate_layout: masks need one channel per plane plus non-planar");
  }
  masks.require_normalized(1e-6);
  roles.validate(planes.size());
  const LabelMap seg = segmentation_roles(masks, roles);

  LayoutResult best;
  bool found = false;
  for (const auto& config : layout_catalog()) {
    bool feasible = true;
    for (int r = 0; r < kNumRoles; ++r) feasible &= !config.has(static_cast<Role>(r)) || roles.plane[r].has_value();
    if (!feasible) {
      best.catalog_scores.push_back(0);
      continue;
    }
    LabelMap layout = project_layout(planes, roles, config, k);
    std::size_t score = 0;
    for (std::size_t i = 0; i < layout.pixels(); ++i) score += layout[i] == seg[i];
    best.catalog_scores.push_back(score);
    if (!found || score > best.score) {
      found = true;
      best.score = score;
      best.configuration = config;
      best.roles = std::move(layout);
    }
  }
  if (!found) throw InvalidConfig("estimate_layout: no configuration is covered by the role assignment");
  return best;
}

/// Fraction of pixels whose role labels differ.
inline double layout_pixel_error(const LabelMap& pred, const LabelMap& gt) {
  require_same_size(pred.size(), gt.size(), "layout_pixel_error: pred vs gt");
  if (pred.pixels() == 0) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < pred.pixels(); ++i) diff += pred[i] != gt[i];
  return static_cast<double>(diff) / static_cast<double>(pred.pixels());
}

/// Heuristic role proposal from camera-frame plane geometry (y points down):
/// floor = closest point within `cone_deg` of straight down, ceiling = of
/// straight up, walls = near-horizontal normals, the most forward-facing one
/// is the middle wall and the others go left / right by the sign of x.
/// Among several candidates for a role the nearest plane wins.
inline RoleAssignment propose_roles(std::span<const Plane> planes, double cone_deg = 30.0) {
  RoleAssignment out;
  const double c = std::cos(cone_deg * std::numbers::pi / 180.0);
  const double s = std::sin(cone_deg * std::numbers::pi / 180.0);
  std::array<double, kNumRoles> best_score;
  best_score.fill(std::numeric_limits<double>::infinity());
  auto offer = [&](Role r, std::size_t j, double score) {
    if (score < best_score[static_cast<int>(r)]) {
      best_score[static_cast<int>(r)] = score;
      out[r] = j;
    }
  };
  std::vector<std::size_t> walls;
  for (std::size_t j = 0; j < planes.size(); ++j) {
    const Vec3& n = planes[j].normal();
    if (n.y() >= c) {
      offer(Role::floor, j, planes[j].offset());
    } else if (-n.y() >= c) {
      offer(Role::ceiling, j, planes[j].offset());
    } else if (std::abs(n.y()) <= s) {
      walls.push_back(j);
    }
  }
  // Middle wall: most frontal wall, nearest on ties.
  long middle = -1;
  for (std::size_t j : walls) {
    if (middle < 0 || planes[j].normal().z() > planes[static_cast<std::size_t>(middle)].normal().z() + 1e-9) {
      middle = static_cast<long>(j);
    }
  }
  if (middle >= 0 && planes[static_cast<std::size_t>(middle)].normal().z() > std::cos(45.0 * std::numbers::pi / 180.0)) {
    out[Role::wall_middle] = static_cast<std::size_t>(middle);
  } else {
    middle = -1;
  }
  for (std::size_t j : walls) {
    if (static_cast<long>(j) == middle) continue;
    const Vec3& n = planes[j].normal();
    if (std::abs(n.x()) < s) continue;  // facing forward or backward
    offer(n.x() < 0.0 ? Role::wall_left : Role::wall_right, j, planes[j].offset());
  }
  return out;
}

}  // namespace planekit

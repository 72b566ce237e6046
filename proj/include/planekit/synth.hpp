#pragma once

// Deterministic synthetic indoor scenes with analytic ground truth: an
// axis-aligned box room seen from inside, optional yawed cuboids, ray-cast
// depth / plane labels / room-layout roles, a flat-shaded colour image, a
// matching triangle mesh, and depth corruption models.
//
// World frame: x right, y forward, z up; the room spans [0, size] on each axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "planekit/geometry.hpp"
#include "planekit/gt_pipeline.hpp"
#include "planekit/layout.hpp"
#include "planekit/losses.hpp"
#include "planekit/random.hpp"

namespace planekit {

struct Cuboid {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  double yaw_deg = 0.0;  ///< rotation about world z

  Mat3 rotation() const {
    const double a = yaw_deg * std::numbers::pi / 180.0;
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0.0, std::sin(a), std::cos(a), 0.0, 0.0, 0.0, 1.0;
    return r;  // local -> world
  }
  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    const Mat3 r = rotation();
    for (int i = 0; i < 8; ++i) {
      const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
      out[i] = center + r * s.cwiseProduct(half_extents);
    }
    return out;
  }
  bool contains(const Vec3& p, double margin = 0.0) const {
    const Vec3 local = rotation().transpose() * (p - center);
    return (local.cwiseAbs() - half_extents).maxCoeff() < margin;
  }
};

struct SceneSpec {
  Vec3 room_size{4.0, 5.0, 2.8};
  Vec3 camera_position{2.0, 1.5, 1.5};
  double yaw_deg = 0.0;    ///< positive turns right (towards +x)
  double pitch_deg = 0.0;  ///< positive looks up
  double roll_deg = 0.0;
  std::vector<Cuboid> cuboids;
  std::uint64_t rng_seed = 0;
  CameraIntrinsics intrinsics{220.0, 220.0, 127.5, 95.5, 256, 192};
  double image_noise = 2.0;  ///< intensity standard deviation

  /// World-to-camera pose (camera x right, y down, z forward).
  Pose pose() const {
    const double y = yaw_deg * std::numbers::pi / 180.0;
    const double p = pitch_deg * std::numbers::pi / 180.0;
    const double r = roll_deg * std::numbers::pi / 180.0;
    const Vec3 forward(std::sin(y) * std::cos(p), std::cos(y) * std::cos(p), std::sin(p));
    const Vec3 right0(std::cos(y), -std::sin(y), 0.0);
    const Vec3 down0 = forward.cross(right0);
    const Vec3 right = std::cos(r) * right0 + std::sin(r) * down0;
    const Vec3 down = forward.cross(right);
    Pose pose;
    pose.rotation.row(0) = right.transpose();
    pose.rotation.row(1) = down.transpose();
    pose.rotation.row(2) = forward.transpose();
    pose.translation = -pose.rotation * camera_position;
    return pose;
  }

  void validate() const {
    intrinsics.validate();
    if (!(room_size.minCoeff() > 0.0)) throw ValidationError("scene: room extents must be positive");
    const double margin = 1e-3;
    for (int a = 0; a < 3; ++a) {
      if (!(camera_position(a) > margin && camera_position(a) < room_size(a) - margin)) {
        throw CameraOutsideRoom("scene: camera must be strictly inside the room");
      }
    }
    for (const auto& c : cuboids) {
      if (!(c.half_extents.minCoeff() > 0.0)) throw ValidationError("scene: cuboid extents must be positive");
      for (const Vec3& q : c.corners()) {
        for (int a = 0; a < 3; ++a) {
          if (q(a) < -1e-9 || q(a) > room_size(a) + 1e-9) throw ValidationError("scene: cuboid leaves the room");
        }
      }
      if (c.contains(camera_position, 1e-3)) throw ValidationError("scene: camera inside a cuboid");
    }
  }
};

/// Room faces in a fixed order; the role of each (the back wall has none).
enum class RoomFace : int { floor = 0, ceiling = 1, left = 2, right = 3, back = 4, front = 5 };
inline constexpr int kRoomFaces = 6;

inline std::optional<Role> room_face_role(int face) {
  switch (static_cast<RoomFace>(face)) {
    case RoomFace::floor: return Role::floor;
    case RoomFace::ceiling: return Role::ceiling;
    case RoomFace::left: return Role::wall_left;
    case RoomFace::right: return Role::wall_right;
    case RoomFace::front: return Role::wall_middle;
    case RoomFace::back: return std::nullopt;
  }
  return std::nullopt;
}

/// One planar face of the scene in world coordinates.
struct SceneFace {
  int solid = -1;  ///< -1 for the room, else cuboid index
  int face = 0;    ///< 0..5: -z, +z, -x, +x, -y, +y (local axes for cuboids)
  Vec3 point;      ///< a point on the face
  Vec3 normal;     ///< unit, world frame
};

inline std::vector<SceneFace> scene_faces(const SceneSpec& spec) {
  std::vector<SceneFace> out;
  const Vec3& s = spec.room_size;
  // Axis and side per face index: floor, ceiling, left, right, back, front.
  const std::array<std::pair<int, int>, 6> axes = {{{2, 0}, {2, 1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  for (int f = 0; f < 6; ++f) {
    const auto [a, side] = axes[f];
    Vec3 p = 0.5 * s;
    p(a) = side ? s(a) : 0.0;
    out.push_back({-1, f, p, Vec3::Unit(a) * (side ? 1.0 : -1.0)});
  }
  for (std::size_t c = 0; c < spec.cuboids.size(); ++c) {
    const Cuboid& cb = spec.cuboids[c];
    const Mat3 r = cb.rotation();
    for (int f = 0; f < 6; ++f) {
      const auto [a, side] = axes[f];
      const Vec3 local_n = Vec3::Unit(a) * (side ? 1.0 : -1.0);
      out.push_back({static_cast<int>(c), f, cb.center + r * (local_n * cb.half_extents(a)), r * local_n});
    }
  }
  return out;
}

struct SceneRender {
  CameraIntrinsics intrinsics;
  Pose pose;
  DepthMap depth;
  LabelMap labels;  ///< plane ids in `planes`, ordered by descending area
  PlaneSet planes;  ///< camera frame
  LabelMap roles;   ///< Role values from the room alone (cuboids removed); kNoRole elsewhere
  RoleAssignment role_planes;
  LayoutConfiguration visible_roles;
  RgbImage image;
  std::vector<int> plane_face;  ///< scene-face index of each plane (first face when merged)
};

namespace detail {

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  int face = -1;  ///< index into scene_faces
};

/// Exit of the ray from the room interior; faces 0..5 as in scene_faces.
inline RayHit room_exit(const Vec3& origin, const Vec3& dir, const Vec3& size) {
  RayHit hit;
  const std::array<int, 3> lo_face = {2, 4, 0}, hi_face = {3, 5, 1};
  for (int a = 0; a < 3; ++a) {
    if (dir(a) > 0.0) {
      const double t = (size(a) - origin(a)) / dir(a);
      if (t < hit.t) hit = {t, hi_face[a]};
    } else if (dir(a) < 0.0) {
      const double t = -origin(a) / dir(a);
      if (t < hit.t) hit = {t, lo_face[a]};
    }
  }
  return hit;
}

/// Entry into a cuboid from outside (slab test); face index local 0..5.
inline std::optional<RayHit> cuboid_entry(const Vec3& origin, const Vec3& dir, const Cuboid& cb) {
  const Mat3 rt = cb.rotation().transpose();
  const Vec3 o = rt * (origin - cb.center);
  const Vec3 d = rt * dir;
  double t_near = -std::numeric_limits<double>::infinity(), t_far = std::numeric_limits<double>::infinity();
  int face = -1;
  const std::array<int, 3> lo_face = {2, 4, 0}, hi_face = {3, 5, 1};
  for (int a = 0; a < 3; ++a) {
    const double h = cb.half_extents(a);
    if (d(a) == 0.0) {
      if (std::abs(o(a)) > h) return std::nullopt;
      continue;
    }
    double t1 = (-h - o(a)) / d(a), t2 = (h - o(a)) / d(a);
    int f1 = lo_face[a], f2 = hi_face[a];
    if (t1 > t2) {
      std::swap(t1, t2);
      std::swap(f1, f2);
    }
    if (t1 > t_near) {
      t_near = t1;
      face = f1;
    }
    t_far = std::min(t_far, t2);
  }
  if (!(t_near <= t_far) || !(t_near > 0.0) || face < 0) return std::nullopt;
  return RayHit{t_near, face};
}

inline Rgb shade(std::uint64_t key, const Vec3& normal, double noise, Rng& rng) {
  std::uint64_t h = derive_seed(key, 17);
  const Vec3 light = Vec3(0.3, -0.5, 0.8).normalized();
  const double lambert = 0.45 + 0.55 * std::abs(normal.dot(light));
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    const double albedo = 70.0 + static_cast<double>((h >> (16 * c)) & 0xFF) * 0.7;
    const double x = albedo * lambert + noise * rng.normal();
    out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(x), 0L, 255L));
  }
  return out;
}

}  // namespace detail

/// Analytic ray casting: each pixel takes the nearest of the room's exit face
/// and every cuboid entry face. Coplanar faces share one plane id.
inline SceneRender render_scene(const SceneSpec& spec) {
  spec.validate();
  const CameraIntrinsics& k = spec.intrinsics;
  const Pose pose = spec.pose();
  const Vec3 origin = spec.camera_position;
  const Mat3 rt = pose.rotation.transpose();
  const auto faces = scene_faces(spec);

  // Camera-frame plane per face, merged by parameter (faces through the
  // camera centre have no plane and are never hit by a pixel ray).
  std::vector<std::optional<Plane>> face_plane(faces.size());
  std::vector<int> face_group(faces.size(), -1);
  std::vector<Plane> groups;
  std::vector<int> group_face;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Vec3 n = pose.rotation * faces[f].normal;
    const double d = n.dot(pose.apply(faces[f].point));
    if (std::abs(d) <= kMinPlaneOffset) continue;
    face_plane[f] = Plane::from_signed(n, d);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if ((groups[g].param() - face_plane[f]->param()).norm() < 1e-9) {
        face_group[f] = static_cast<int>(g);
        break;
      }
    }
    if (face_group[f] < 0) {
      face_group[f] = static_cast<int>(groups.size());
      groups.push_back(*face_plane[f]);
      group_face.push_back(static_cast<int>(f));
    }
  }

  const std::size_t N = k.size().pixels();
  std::vector<int> pixel_face(N, -1), pixel_room_face(N, -1);
  std::vector<double> pixel_t(N, 0.0);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const std::size_t i = k.size().index(u, v);
      const Vec3 dir = rt * k.ray(u, v);
      detail::RayHit best = detail::room_exit(origin, dir, spec.room_size);
      pixel_room_face[i] = best.face;
      for (std::size_t c = 0; c < spec.cuboids.size(); ++c) {
        if (auto h = detail::cuboid_entry(origin, dir, spec.cuboids[c]); h && h->t < best.t) {
          best = {h->t, kRoomFaces + static_cast<int>(c) * 6 + h->face};
        }
      }
      pixel_face[i] = best.face;
      pixel_t[i] = best.t;
    }
  }

  // Plane ids by descending area, ties by face order.
  std::vector<std::size_t> group_area(groups.size(), 0);
  for (std::size_t i = 0; i < N; ++i) {
    if (pixel_face[i] >= 0 && face_group[pixel_face[i]] >= 0) ++group_area[face_group[pixel_face[i]]];
  }
  std::vector<int> order;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (group_area[g] > 0) order.push_back(static_cast<int>(g));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return group_area[a] > group_area[b]; });
  std::vector<int> group_id(groups.size(), -1);
  SceneRender out;
  out.intrinsics = k;
  out.pose = pose;
  out.planes.capacity = std::max<int>(kDefaultPlaneCapacity, static_cast<int>(order.size()));
  for (std::size_t j = 0; j < order.size(); ++j) {
    group_id[order[j]] = static_cast<int>(j);
    out.planes.planes.push_back(groups[order[j]]);
    out.plane_face.push_back(group_face[order[j]]);
  }

  const int K = static_cast<int>(order.size());
  out.depth = DepthMap(k.width, k.height);
  out.labels = LabelMap(k.width, k.height, K);
  out.roles = LabelMap(k.width, k.height, kNumRoles);
  out.image = RgbImage(k.width, k.height);
  Rng rng(spec.rng_seed);
  for (std::size_t i = 0; i < N; ++i) {
    const int f = pixel_face[i];
    if (f < 0) continue;
    out.depth.set(i, pixel_t[i]);
    const int g = face_group[f];
    if (g >= 0) out.labels.set(i, group_id[g]);
    const Vec3 key = faces[f].normal * 1000.0 + faces[f].point;
    const auto hash = static_cast<std::uint64_t>(std::llround(key.x() * 7.0 + key.y() * 131.0 + key.z() * 1031.0)) ^
                      (static_cast<std::uint64_t>(faces[f].solid + 2) << 40);
    out.image[i] = detail::shade(hash, faces[f].normal, spec.image_noise, rng);
    if (auto role = room_face_role(pixel_room_face[i])) out.roles.set(i, static_cast<int>(*role));
  }

  // Role -> plane id for room faces visible in the label map.
  for (int f = 0; f < kRoomFaces; ++f) {
    auto role = room_face_role(f);
    if (!role || face_group[f] < 0 || group_id[face_group[f]] < 0) continue;
    out.role_planes[*role] = static_cast<std::size_t>(group_id[face_group[f]]);
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (out.roles[i] < kNumRoles) out.visible_roles.mask |= 1U << out.roles[i];
  }
  return out;
}

/// Room planes (camera frame) for each role whose face does not pass through
/// the camera centre.
inline std::array<std::optional<Plane>, kNumRoles> room_role_planes(const SceneSpec& spec) {
  std::array<std::optional<Plane>, kNumRoles> out;
  const Pose pose = spec.pose();
  const auto faces = scene_faces(spec);
  for (int f = 0; f < kRoomFaces; ++f) {
    auto role = room_face_role(f);
    if (!role) continue;
    const Vec3 n = pose.rotation * faces[f].normal;
    const double d = n.dot(pose.apply(faces[f].point));
    if (std::abs(d) > kMinPlaneOffset) out[static_cast<int>(*role)] = Plane::from_signed(n, d);
  }
  return out;
}

/// Triangulated room and cuboids, each face split into `subdivisions`^2 quads
/// with its own vertices. Room faces carry labels 0..5 (scene_faces order);
/// cuboid c carries label 6 + c on all its faces.
inline SemanticMesh emit_mesh(const SceneSpec& spec, int subdivisions = 1) {
  spec.validate();
  require(subdivisions >= 1, "emit_mesh: subdivisions must be >= 1");
  SemanticMesh mesh;
  const auto faces = scene_faces(spec);
  for (const auto& f : faces) {
    // Two in-plane half extents for the face.
    Vec3 e1, e2;
    constexpr std::array<int, 6> face_axis = {2, 2, 0, 0, 1, 1};
    const int axis = face_axis[f.face];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    Mat3 r = Mat3::Identity();
    Vec3 half;
    if (f.solid < 0) {
      half = 0.5 * spec.room_size;
    } else {
      r = spec.cuboids[f.solid].rotation();
      half = spec.cuboids[f.solid].half_extents;
    }
    e1 = r * Vec3::Unit(a1) * half(a1);
    e2 = r * Vec3::Unit(a2) * half(a2);
    const int label = f.solid < 0 ? f.face : kRoomFaces + f.solid;
    const int base = static_cast<int>(mesh.vertices.size());
    const int n = subdivisions;
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        const double s = -1.0 + 2.0 * i / n, t = -1.0 + 2.0 * j / n;
        mesh.vertices.push_back(f.point + s * e1 + t * e2);
        mesh.vertex_labels.push_back(label);
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int a = base + j * (n + 1) + i;
        mesh.triangles.push_back({a, a + 1, a + n + 2});
        mesh.triangles.push_back({a, a + n + 2, a + n + 1});
      }
    }
  }
  return mesh;
}

struct NoiseSpec {
  double depth_gaussian_sigma = 0.0;  ///< metres
  double dropout_fraction = 0.0;      ///< of valid pixels
  double quantization_step = 0.0;     ///< metres, 0 = none

  void validate() const {
    if (!(depth_gaussian_sigma >= 0.0 && dropout_fraction >= 0.0 && dropout_fraction <= 1.0 &&
          quantization_step >= 0.0)) {
      throw InvalidConfig("noise: parameters must be non-negative (dropout <= 1)");
    }
  }
};

/// Seeded Gaussian noise on valid pixels, quantisation, then invalidation of
/// exactly round(fraction * valid) pixels chosen by a seeded shuffle.
inline DepthMap corrupt(const DepthMap& depth, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  DepthMap out = depth;
  Rng rng(seed);
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < depth.pixels(); ++i) {
    if (!depth.valid(i)) continue;
    valid.push_back(i);
    double z = depth.depth(i);
    if (noise.depth_gaussian_sigma > 0.0) z += noise.depth_gaussian_sigma * rng.normal();
    if (noise.quantization_step > 0.0) z = std::round(z / noise.quantization_step) * noise.quantization_step;
    out.set(i, z);
  }
  const auto drop = static_cast<std::size_t>(std::llround(noise.dropout_fraction * static_cast<double>(valid.size())));
  if (drop > 0) {
    Rng pick(derive_seed(seed, 1));
    // Partial Fisher-Yates: the first `drop` entries are the dropped pixels.
    for (std::size_t i = 0; i < drop; ++i) {
      std::swap(valid[i], valid[i + pick.index(valid.size() - i)]);
      out.invalidate(valid[i]);
    }
  }
  return out;
}

struct RandomSceneOptions {
  int max_cuboids = 2;
  int min_cuboids = 0;
  CameraIntrinsics intrinsics{220.0, 220.0, 127.5, 95.5, 256, 192};
};

/// Seeded random room: camera in the back half looking roughly at the front
/// wall (so the back wall stays out of view), cuboids on the floor ahead.
inline SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& opt = {}) {
  Rng rng(derive_seed(seed, 0x5CE4E));
  SceneSpec s;
  s.rng_seed = seed;
  s.intrinsics = opt.intrinsics;
  s.room_size = {rng.uniform(3.0, 6.0), rng.uniform(4.0, 7.0), rng.uniform(2.4, 3.2)};
  s.camera_position = {rng.uniform(0.35, 0.65) * s.room_size.x(), rng.uniform(0.15, 0.35) * s.room_size.y(),
                       rng.uniform(1.2, 1.7)};
  s.yaw_deg = rng.uniform(-20.0, 20.0);
  s.pitch_deg = rng.uniform(-15.0, 5.0);
  s.roll_deg = rng.uniform(-2.0, 2.0);
  const int span = std::max(0, opt.max_cuboids - opt.min_cuboids);
  const int count = opt.min_cuboids + static_cast<int>(rng.index(static_cast<std::size_t>(span) + 1));
  for (int c = 0, attempts = 0; c < count && attempts < 200; ++attempts) {
    Cuboid cb;
    cb.half_extents = {rng.uniform(0.25, 0.6), rng.uniform(0.25, 0.6), rng.uniform(0.2, 0.5)};
    cb.yaw_deg = rng.uniform(-45.0, 45.0);
    cb.center = {rng.uniform(0.0, s.room_size.x()), rng.uniform(s.camera_position.y() + 1.2, s.room_size.y()),
                 cb.half_extents.z()};
    SceneSpec trial = s;
    trial.cuboids.push_back(cb);
    bool ok = true;
    try {
      trial.validate();
    } catch (const Error&) {
      ok = false;
    }
    for (const auto& other : s.cuboids) {
      ok &= (other.center - cb.center).head<2>().norm() > other.half_extents.head<2>().norm() + cb.half_extents.head<2>().norm();
    }
    if (!ok) continue;
    s.cuboids.push_back(cb);
    ++c;
  }
  return s;
}

}  // namespace planekit

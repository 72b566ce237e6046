#pragma once

// File formats: 16-bit millimetre depth PNG, 8-bit label / role PNG, RGB PNG,
// plane / intrinsics / trajectory / scene JSON, ASCII PLY and OBJ meshes with
// semantic labels, float64 .npy mask stacks and SVG recall plots. Every
// writer goes through a temporary file and a rename.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "planekit/gt_pipeline.hpp"
#include "planekit/image.hpp"
#include "planekit/layout.hpp"
#include "planekit/losses.hpp"
#include "planekit/evaluation.hpp"
#include "planekit/synth.hpp"

namespace planekit::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Thrown for filesystem failures (missing files, unwritable paths).
class IoError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Raw file access

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

inline Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw BadFormat(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// PNG

struct PngPixels {
  int width = 0;
  int height = 0;
  int channels = 0;   ///< 1 gray, 3 RGB
  int bit_depth = 0;  ///< 8 or 16
  std::vector<std::uint16_t> samples;  ///< row-major, interleaved channels
};

namespace detail {

struct PngReadBuffer {
  const std::string* data;
  std::size_t pos = 0;
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

/// Decodes gray or RGB PNGs at 8 or 16 bits (palette and alpha are rejected).
inline PngPixels decode_png(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw BadFormat(name + ": not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn, detail::png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  detail::PngReadBuffer buf{&bytes, 0};
  PngPixels out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw BadFormat(name + ": " + err);
  }
  png_set_read_fn(png, &buf, [](png_structp p, png_bytep dst, png_size_t n) {
    auto* b = static_cast<detail::PngReadBuffer*>(png_get_io_ptr(p));
    if (b->pos + n > b->data->size()) png_error(p, "truncated PNG data");
    std::memcpy(dst, b->data->data() + b->pos, n);
    b->pos += n;
  });
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_GRAY) {
    out.channels = 1;
  } else if (color == PNG_COLOR_TYPE_RGB) {
    out.channels = 3;
  } else {
    png_destroy_read_struct(&png, &info, nullptr);
    throw BadFormat(name + ": only gray or RGB PNGs are supported");
  }
  if (depth != 8 && depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw BadFormat(name + ": only 8- or 16-bit PNGs are supported");
  }
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = depth;
  const std::size_t bytes_per_sample = depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(out.width) * out.channels * bytes_per_sample;
  raw.resize(row_bytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = raw.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.samples.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = depth == 16 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  }
  return out;
}

inline std::string encode_png(const PngPixels& img) {
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn, detail::png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  std::string out;
  const std::size_t bytes_per_sample = img.bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels * bytes_per_sample;
  std::vector<std::uint8_t> raw(row_bytes * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (img.bit_depth == 16) {
      raw[2 * i] = static_cast<std::uint8_t>(img.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(img.samples[i] & 0xFF);
    } else {
      raw[i] = static_cast<std::uint8_t>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = raw.data() + row_bytes * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed: " + err);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep src, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(src), n);
      },
      [](png_structp) {});
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline PngPixels read_png(const fs::path& path) { return decode_png(read_file(path), path.string()); }

inline constexpr double kMaxPngDepth = 65.535;

/// Depth in millimetres, 0 = invalid. Throws OutOfRange for depths that do
/// not fit (above 65.535 m, or rounding to 0).
inline PngPixels depth_to_png(const DepthMap& depth) {
  PngPixels img{depth.width(), depth.height(), 1, 16, std::vector<std::uint16_t>(depth.pixels(), 0)};
  for (std::size_t i = 0; i < depth.pixels(); ++i) {
    if (!depth.valid(i)) continue;
    const double z = depth.depth(i);
    if (z > kMaxPngDepth) throw OutOfRange("depth " + std::to_string(z) + " m exceeds 65.535 m");
    const long long mm = std::llround(z * 1000.0);
    if (mm <= 0) throw OutOfRange("depth " + std::to_string(z) + " m rounds to the invalid value 0");
    img.samples[i] = static_cast<std::uint16_t>(mm);
  }
  return img;
}

inline void write_depth_png(const fs::path& path, const DepthMap& depth) {
  write_file_atomic(path, encode_png(depth_to_png(depth)));
}

inline DepthMap read_depth_png(const fs::path& path) {
  const PngPixels img = read_png(path);
  if (img.channels != 1 || img.bit_depth != 16) throw BadFormat(path.string() + ": depth PNG must be 16-bit gray");
  DepthMap out(img.width, img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (img.samples[i] != 0) out.set(i, static_cast<double>(img.samples[i]) / 1000.0);
  }
  return out;
}

inline constexpr std::uint16_t kNonPlanarPng = 255;

/// Labels 0..K-1 as-is, the non-planar label as 255.
inline void write_label_png(const fs::path& path, const LabelMap& labels) {
  if (labels.num_planes() > 255) throw OutOfRange("label PNG holds at most 255 planes");
  PngPixels img{labels.width(), labels.height(), 1, 8, std::vector<std::uint16_t>(labels.pixels(), kNonPlanarPng)};
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (labels.planar(i)) img.samples[i] = static_cast<std::uint16_t>(labels[i]);
  }
  write_file_atomic(path, encode_png(img));
}

/// Inverse of write_label_png. Values other than 0..num_planes-1 and 255
/// raise LabelOutOfRange.
inline LabelMap read_label_png(const fs::path& path, int num_planes) {
  const PngPixels img = read_png(path);
  if (img.channels != 1 || img.bit_depth != 8) throw BadFormat(path.string() + ": label PNG must be 8-bit gray");
  LabelMap out(img.width, img.height, num_planes);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    const int v = img.samples[i];
    if (v == kNonPlanarPng) continue;
    if (v >= num_planes) throw LabelOutOfRange(path.string() + ": label " + std::to_string(v) + " has no plane");
    out.set(i, v);
  }
  return out;
}

/// Largest plane label stored in a label PNG plus one (0 when none).
inline int label_png_extent(const fs::path& path) {
  const PngPixels img = read_png(path);
  int k = 0;
  for (auto s : img.samples) {
    if (s != kNonPlanarPng) k = std::max(k, static_cast<int>(s) + 1);
  }
  return k;
}

inline void write_rgb_png(const fs::path& path, const RgbImage& image) {
  PngPixels img{image.width(), image.height(), 3, 8, std::vector<std::uint16_t>(image.pixels() * 3)};
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) img.samples[3 * i + c] = image[i][c];
  }
  write_file_atomic(path, encode_png(img));
}

/// Reads 8-bit RGB or gray (replicated to three channels).
inline RgbImage read_rgb_png(const fs::path& path) {
  const PngPixels img = read_png(path);
  if (img.bit_depth != 8) throw BadFormat(path.string() + ": colour PNG must be 8-bit");
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out[i][c] = static_cast<std::uint8_t>(img.samples[i * img.channels + (img.channels == 3 ? c : 0)]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 json_vec(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(what + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw SchemaError(what + ": expected numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw SchemaError(what + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok |= it.key() == k;
    if (!ok) throw SchemaError(what + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T json_field(const Json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw SchemaError(what + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(what + ": field '" + std::string(key) + "' has the wrong type");
  }
}

/// {"planes":[{"param":[x,y,z]}...],"k_capacity":K,"frame":"camera"}.
/// Doubles are written in shortest round-trip form, so reading back is bit-exact.
inline Json planes_to_json(const PlaneSet& set, const std::string& frame = "camera") {
  Json planes = Json::array();
  for (const auto& p : set.planes) planes.push_back(Json{{"param", vec_json(p.param())}});
  return Json{{"planes", planes}, {"k_capacity", set.capacity}, {"frame", frame}};
}

inline PlaneSet planes_from_json(const Json& j) {
  const std::string what = "planes JSON";
  require_keys(j, {"planes", "k_capacity", "frame"}, what);
  if (!j.contains("planes") || !j["planes"].is_array()) throw SchemaError(what + ": 'planes' must be an array");
  PlaneSet out;
  out.capacity = json_field<int>(j, "k_capacity", what);
  if (j.contains("frame") && json_field<std::string>(j, "frame", what) != "camera") {
    throw SchemaError(what + ": only camera-frame planes are supported");
  }
  for (const auto& e : j["planes"]) {
    require_keys(e, {"param"}, what);
    if (!e.contains("param")) throw SchemaError(what + ": plane without 'param'");
    const Vec3 p = json_vec(e["param"], what);
    try {
      out.planes.push_back(Plane::from_param(p));
    } catch (const DegeneratePlane& err) {
      throw SchemaError(what + ": " + err.what());
    }
  }
  if (out.planes.empty()) throw SchemaError(what + ": at least one plane is required");
  if (out.capacity < 1 || out.planes.size() > static_cast<std::size_t>(out.capacity)) {
    throw SchemaError(what + ": more planes than k_capacity");
  }
  return out;
}

inline void write_planes_json(const fs::path& path, const PlaneSet& set) { write_json(path, planes_to_json(set)); }
inline PlaneSet read_planes_json(const fs::path& path) { return planes_from_json(read_json(path)); }

inline Json intrinsics_to_json(const CameraIntrinsics& k) {
  return Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const Json& j) {
  const std::string what = "intrinsics JSON";
  require_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, what);
  CameraIntrinsics k{json_field<double>(j, "fx", what), json_field<double>(j, "fy", what),
                     json_field<double>(j, "cx", what), json_field<double>(j, "cy", what),
                     json_field<int>(j, "width", what),  json_field<int>(j, "height", what)};
  try {
    k.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(what + ": " + e.what());
  }
  return k;
}

inline void write_intrinsics_json(const fs::path& path, const CameraIntrinsics& k) {
  write_json(path, intrinsics_to_json(k));
}
inline CameraIntrinsics read_intrinsics_json(const fs::path& path) { return intrinsics_from_json(read_json(path)); }

/// {"rotation":[9 numbers, row-major],"translation":[x,y,z]}, world-to-camera.
inline Json pose_to_json(const Pose& p) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 3; ++c) r.push_back(p.rotation(i, c));
  }
  return Json{{"rotation", r}, {"translation", vec_json(p.translation)}};
}

inline Pose pose_fields_from_json(const Json& j, const std::string& what) {
  if (!j.contains("rotation") || !j["rotation"].is_array() || j["rotation"].size() != 9) {
    throw SchemaError(what + ": 'rotation' must hold 9 numbers (row-major)");
  }
  Pose p;
  for (int i = 0; i < 9; ++i) {
    if (!j["rotation"][i].is_number()) throw SchemaError(what + ": rotation entries must be numbers");
    p.rotation(i / 3, i % 3) = j["rotation"][i].get<double>();
  }
  if (!j.contains("translation")) throw SchemaError(what + ": missing 'translation'");
  p.translation = json_vec(j["translation"], what);
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(what + ": " + e.what());
  }
  return p;
}

inline Pose pose_from_json(const Json& j) {
  require_keys(j, {"rotation", "translation"}, "pose JSON");
  return pose_fields_from_json(j, "pose JSON");
}

/// [{"intrinsics":{...},"rotation":[9],"translation":[3]}...], world-to-camera poses.
inline Json trajectory_to_json(const std::vector<Frame>& frames) {
  Json arr = Json::array();
  for (const auto& f : frames) {
    Json e = pose_to_json(f.pose);
    arr.push_back(Json{{"intrinsics", intrinsics_to_json(f.intrinsics)}, {"rotation", e["rotation"]}, {"translation", e["translation"]}});
  }
  return arr;
}

inline std::vector<Frame> trajectory_from_json(const Json& j) {
  if (!j.is_array()) throw SchemaError("trajectory JSON: expected a list of frames");
  std::vector<Frame> out;
  for (const auto& f : j) {
    require_keys(f, {"intrinsics", "rotation", "translation"}, "trajectory frame");
    if (!f.contains("intrinsics")) throw SchemaError("trajectory frame: missing 'intrinsics'");
    out.push_back({intrinsics_from_json(f["intrinsics"]), pose_fields_from_json(f, "trajectory frame")});
  }
  return out;
}

inline Json roles_to_json(const RoleAssignment& roles, std::optional<LayoutConfiguration> config = std::nullopt) {
  Json r = Json::object();
  for (int i = 0; i < kNumRoles; ++i) {
    if (roles.plane[i]) r[std::string(kRoleNames[i])] = *roles.plane[i];
  }
  Json out{{"roles", r}};
  if (config) out["configuration"] = config->name();
  return out;
}

inline LayoutConfiguration configuration_from_name(const std::string& name) {
  LayoutConfiguration c;
  std::stringstream ss(name);
  std::string part;
  while (std::getline(ss, part, '+')) {
    auto r = role_from_name(part);
    if (!r) throw SchemaError("unknown role '" + part + "'");
    c.mask |= 1U << static_cast<int>(*r);
  }
  return c;
}

inline std::pair<RoleAssignment, std::optional<LayoutConfiguration>> roles_from_json(const Json& j) {
  require_keys(j, {"roles", "configuration"}, "roles JSON");
  if (!j.contains("roles") || !j["roles"].is_object()) throw SchemaError("roles JSON: 'roles' must be an object");
  RoleAssignment out;
  for (auto it = j["roles"].begin(); it != j["roles"].end(); ++it) {
    auto r = role_from_name(it.key());
    if (!r) throw SchemaError("roles JSON: unknown role '" + it.key() + "'");
    if (!it.value().is_number_unsigned()) throw SchemaError("roles JSON: plane index must be a non-negative integer");
    out[*r] = it.value().get<std::size_t>();
  }
  std::optional<LayoutConfiguration> config;
  if (j.contains("configuration")) config = configuration_from_name(json_field<std::string>(j, "configuration", "roles JSON"));
  return {out, config};
}

inline Json scene_to_json(const SceneSpec& s) {
  Json cuboids = Json::array();
  for (const auto& c : s.cuboids) {
    cuboids.push_back(Json{{"center", vec_json(c.center)}, {"half_extents", vec_json(c.half_extents)}, {"yaw_deg", c.yaw_deg}});
  }
  return Json{{"room_size", vec_json(s.room_size)},
              {"camera_position", vec_json(s.camera_position)},
              {"yaw_deg", s.yaw_deg},
              {"pitch_deg", s.pitch_deg},
              {"roll_deg", s.roll_deg},
              {"cuboids", cuboids},
              {"rng_seed", s.rng_seed},
              {"image_noise", s.image_noise},
              {"intrinsics", intrinsics_to_json(s.intrinsics)}};
}

inline SceneSpec scene_from_json(const Json& j) {
  const std::string what = "scene JSON";
  require_keys(j, {"room_size", "camera_position", "yaw_deg", "pitch_deg", "roll_deg", "cuboids", "rng_seed", "image_noise",
                   "intrinsics", "seed", "noise"},
               what);
  SceneSpec s;
  if (j.contains("room_size")) s.room_size = json_vec(j["room_size"], what);
  if (j.contains("camera_position")) s.camera_position = json_vec(j["camera_position"], what);
  if (j.contains("yaw_deg")) s.yaw_deg = json_field<double>(j, "yaw_deg", what);
  if (j.contains("pitch_deg")) s.pitch_deg = json_field<double>(j, "pitch_deg", what);
  if (j.contains("roll_deg")) s.roll_deg = json_field<double>(j, "roll_deg", what);
  if (j.contains("rng_seed")) s.rng_seed = json_field<std::uint64_t>(j, "rng_seed", what);
  if (j.contains("image_noise")) s.image_noise = json_field<double>(j, "image_noise", what);
  if (j.contains("intrinsics")) s.intrinsics = intrinsics_from_json(j["intrinsics"]);
  if (j.contains("cuboids")) {
    for (const auto& c : j["cuboids"]) {
      require_keys(c, {"center", "half_extents", "yaw_deg"}, "cuboid");
      Cuboid cb;
      cb.center = json_vec(c.at("center"), "cuboid");
      cb.half_extents = json_vec(c.at("half_extents"), "cuboid");
      if (c.contains("yaw_deg")) cb.yaw_deg = json_field<double>(c, "yaw_deg", "cuboid");
      s.cuboids.push_back(cb);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Meshes

namespace detail {

inline std::string exact(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw BadFormat(what + ": bad number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw BadFormat(what + ": bad integer '" + s + "'");
  return v;
}

}  // namespace detail

/// ASCII PLY: double x, y, z and int label per vertex; triangle faces.
inline std::string mesh_to_ply(const SemanticMesh& mesh) {
  mesh.validate();
  std::ostringstream ss;
  ss << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
     << "\nproperty double x\nproperty double y\nproperty double z\nproperty int label\nelement face "
     << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    ss << detail::exact(v.x()) << ' ' << detail::exact(v.y()) << ' ' << detail::exact(v.z()) << ' '
       << mesh.vertex_labels[i] << '\n';
  }
  for (const auto& t : mesh.triangles) ss << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  return ss.str();
}

inline void write_ply(const fs::path& path, const SemanticMesh& mesh) { write_file_atomic(path, mesh_to_ply(mesh)); }

/// Reads ASCII PLY with x, y, z and a label property (any order, extra
/// vertex properties ignored). Polygons with more than three vertices are
/// fan-triangulated.
inline SemanticMesh mesh_from_ply(const std::string& text, const std::string& name = "PLY") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw BadFormat(name + ": missing 'ply' magic");
  std::size_t n_vertices = 0, n_faces = 0;
  std::vector<std::string> vprops;
  std::string element;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tok == "element") {
      std::size_t count = 0;
      ls >> element >> count;
      if (element == "vertex") n_vertices = count;
      if (element == "face") n_faces = count;
    } else if (tok == "property" && element == "vertex") {
      std::string type, prop;
      ls >> type >> prop;
      vprops.push_back(prop);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!ascii) throw BadFormat(name + ": only ASCII PLY is supported");
  int ix = -1, iy = -1, iz = -1, il = -1;
  for (std::size_t p = 0; p < vprops.size(); ++p) {
    const auto& s = vprops[p];
    const int idx = static_cast<int>(p);
    if (s == "x") ix = idx;
    if (s == "y") iy = idx;
    if (s == "z") iz = idx;
    if (s == "label" || s == "semantic_label") il = idx;
  }
  if (ix < 0 || iy < 0 || iz < 0 || il < 0) throw BadFormat(name + ": vertices need x, y, z and label properties");
  SemanticMesh mesh;
  for (std::size_t i = 0; i < n_vertices; ++i) {
    if (!std::getline(in, line)) throw BadFormat(name + ": truncated vertex list");
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string t; ls >> t;) f.push_back(t);
    if (f.size() < vprops.size()) throw BadFormat(name + ": short vertex line");
    mesh.vertices.emplace_back(detail::parse_double(f[ix], name), detail::parse_double(f[iy], name),
                               detail::parse_double(f[iz], name));
    mesh.vertex_labels.push_back(static_cast<int>(detail::parse_int(f[il], name)));
  }
  for (std::size_t i = 0; i < n_faces; ++i) {
    if (!std::getline(in, line)) throw BadFormat(name + ": truncated face list");
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string t; ls >> t;) f.push_back(t);
    if (f.empty()) throw BadFormat(name + ": empty face line");
    const auto n = static_cast<std::size_t>(detail::parse_int(f[0], name));
    if (n < 3 || f.size() < n + 1) throw BadFormat(name + ": malformed face");
    std::vector<int> idx;
    for (std::size_t k = 0; k < n; ++k) idx.push_back(static_cast<int>(detail::parse_int(f[k + 1], name)));
    for (std::size_t k = 1; k + 1 < n; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
  }
  mesh.validate();
  return mesh;
}

inline SemanticMesh read_ply(const fs::path& path) { return mesh_from_ply(read_file(path), path.string()); }

/// Wavefront OBJ geometry plus a sidecar file with one label per vertex.
inline void write_obj(const fs::path& obj_path, const fs::path& labels_path, const SemanticMesh& mesh) {
  mesh.validate();
  std::ostringstream obj, lab;
  for (const auto& v : mesh.vertices) {
    obj << "v " << detail::exact(v.x()) << ' ' << detail::exact(v.y()) << ' ' << detail::exact(v.z()) << '\n';
  }
  for (const auto& t : mesh.triangles) obj << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  for (int l : mesh.vertex_labels) lab << l << '\n';
  write_file_atomic(obj_path, obj.str());
  write_file_atomic(labels_path, lab.str());
}

inline SemanticMesh read_obj(const fs::path& obj_path, const fs::path& labels_path) {
  const std::string name = obj_path.string();
  std::istringstream in(read_file(obj_path));
  SemanticMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "v") {
      std::string a, b, c;
      ls >> a >> b >> c;
      mesh.vertices.emplace_back(detail::parse_double(a, name), detail::parse_double(b, name), detail::parse_double(c, name));
    } else if (tok == "f") {
      std::vector<int> idx;
      for (std::string t; ls >> t;) {
        const auto slash = t.find('/');
        idx.push_back(static_cast<int>(detail::parse_int(t.substr(0, slash), name)) - 1);
      }
      if (idx.size() < 3) throw BadFormat(name + ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  std::istringstream lab(read_file(labels_path));
  for (std::string t; lab >> t;) mesh.vertex_labels.push_back(static_cast<int>(detail::parse_int(t, labels_path.string())));
  mesh.validate();
  return mesh;
}

// ---------------------------------------------------------------------------
// NPY mask stacks

/// float64, C order, shape (height, width, channels).
inline std::string masks_to_npy(const ProbMaskStack& m) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(m.height()) + ", " +
                       std::to_string(m.width()) + ", " + std::to_string(m.channels()) + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';
  std::string out("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  out += static_cast<char>(len & 0xFF);
  out += static_cast<char>(len >> 8);
  out += header;
  const auto& d = m.data();
  const std::size_t start = out.size();
  out.resize(start + d.size() * sizeof(double));
  static_assert(std::endian::native == std::endian::little, "npy writer assumes a little-endian host");
  std::memcpy(out.data() + start, d.data(), d.size() * sizeof(double));
  return out;
}

inline ProbMaskStack masks_from_npy(const std::string& bytes, const std::string& name = "npy") {
  if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) throw BadFormat(name + ": not an .npy file");
  const int major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0, offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw BadFormat(name + ": truncated header");
    for (int i = 0; i < 4; ++i) header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    offset = 12;
  } else {
    throw BadFormat(name + ": unsupported .npy version");
  }
  if (bytes.size() < offset + header_len) throw BadFormat(name + ": truncated header");
  const std::string header = bytes.substr(offset, header_len);
  if (header.find("'<f8'") == std::string::npos) throw BadFormat(name + ": masks must be little-endian float64");
  if (header.find("'fortran_order': False") == std::string::npos) throw BadFormat(name + ": masks must be C-ordered");
  const auto open = header.find('(', header.find("'shape'"));
  const auto close = header.find(')', open);
  if (open == std::string::npos || close == std::string::npos) throw BadFormat(name + ": missing shape");
  std::vector<long long> shape;
  std::stringstream ss(header.substr(open + 1, close - open - 1));
  for (std::string t; std::getline(ss, t, ',');) {
    t.erase(0, t.find_first_not_of(' '));
    t.erase(t.find_last_not_of(' ') + 1);
    if (!t.empty()) shape.push_back(detail::parse_int(t, name));
  }
  if (shape.size() != 3 || shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0) {
    throw BadFormat(name + ": masks need shape (height, width, channels)");
  }
  ProbMaskStack m(static_cast<int>(shape[1]), static_cast<int>(shape[0]), static_cast<int>(shape[2]));
  const std::size_t data_bytes = m.data().size() * sizeof(double);
  if (bytes.size() != offset + header_len + data_bytes) throw BadFormat(name + ": payload size does not match the shape");
  std::memcpy(m.data().data(), bytes.data() + offset + header_len, data_bytes);
  return m;
}

inline void write_masks_npy(const fs::path& path, const ProbMaskStack& m) { write_file_atomic(path, masks_to_npy(m)); }
inline ProbMaskStack read_masks_npy(const fs::path& path) { return masks_from_npy(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Sample bundles

/// File names of one sample directory.
struct SampleBundle {
  fs::path dir;
  fs::path rgb() const { return dir / "rgb.png"; }
  fs::path depth() const { return dir / "depth.png"; }
  fs::path input_depth() const { return dir / "input_depth.png"; }
  fs::path labels() const { return dir / "labels.png"; }
  fs::path planes() const { return dir / "planes.json"; }
  fs::path intrinsics() const { return dir / "intrinsics.json"; }
  fs::path roles() const { return dir / "roles.png"; }
  fs::path roles_json() const { return dir / "roles.json"; }
  fs::path masks() const { return dir / "masks.npy"; }
};

struct Sample {
  CameraIntrinsics intrinsics;
  PlaneSet planes;
  LabelMap labels;
  DepthMap depth;
  std::optional<RgbImage> rgb;
  std::optional<LabelMap> roles;
};

/// Loads intrinsics, planes, labels and depth (plus colour and roles when
/// present) and checks that all dimensions agree.
inline Sample read_sample(const fs::path& dir) {
  const SampleBundle b{dir};
  Sample s;
  s.intrinsics = read_intrinsics_json(b.intrinsics());
  s.planes = read_planes_json(b.planes());
  s.labels = read_label_png(b.labels(), static_cast<int>(s.planes.size()));
  s.depth = read_depth_png(b.depth());
  require_same_size(s.labels.size(), s.intrinsics.size(), "sample labels vs intrinsics");
  require_same_size(s.depth.size(), s.intrinsics.size(), "sample depth vs intrinsics");
  if (fs::exists(b.rgb())) {
    s.rgb = read_rgb_png(b.rgb());
    require_same_size(s.rgb->size(), s.intrinsics.size(), "sample rgb vs intrinsics");
  }
  if (fs::exists(b.roles())) {
    s.roles = read_label_png(b.roles(), kNumRoles);
    require_same_size(s.roles->size(), s.intrinsics.size(), "sample roles vs intrinsics");
  }
  return s;
}

inline void write_sample(const fs::path& dir, const Sample& s) {
  const SampleBundle b{dir};
  write_intrinsics_json(b.intrinsics(), s.intrinsics);
  write_planes_json(b.planes(), s.planes);
  write_label_png(b.labels(), s.labels);
  write_depth_png(b.depth(), s.depth);
  if (s.rgb) write_rgb_png(b.rgb(), *s.rgb);
  if (s.roles) write_label_png(b.roles(), *s.roles);
}

// ---------------------------------------------------------------------------
// SVG recall plot

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Recall-versus-threshold line chart with axes from 0 to the largest threshold.
inline std::string recall_svg(const std::vector<PlotSeries>& series, const std::string& title,
                              const std::string& x_label = "threshold") {
  const double W = 480, H = 360, L = 60, R = 20, T = 40, B = 50;
  double xmax = 0.0;
  for (const auto& s : series) {
    for (double x : s.x) xmax = std::max(xmax, x);
  }
  if (xmax <= 0.0) xmax = 1.0;
  auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto py = [&](double y) { return H - B - (H - T - B) * std::clamp(y, 0.0, 1.0); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream ss;
  ss << std::setprecision(6);
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  ss << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" << title
     << "</text>\n";
  ss << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    ss << "<text x=\"" << L - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << y << "</text>\n";
    const double x = xmax * i / 5.0;
    ss << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << x << "</text>\n";
  }
  ss << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"12\">" << x_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    ss << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << colors[k % 6] << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) ss << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    ss << "\"/>\n";
    ss << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 + 16 * k << "\" fill=\"" << colors[k % 6]
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace planekit::io

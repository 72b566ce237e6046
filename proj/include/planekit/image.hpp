#pragma once

// Dense per-pixel containers: depth maps, label maps, probability mask stacks
// and 8-bit colour images. Row-major, origin top-left, pixel (u, v) centred at
// integer coordinates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "planekit/errors.hpp"

namespace planekit {

struct ImageSize {
  int width = 0;
  int height = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u);
  }
  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  bool operator==(const ImageSize&) const = default;
};

inline void require_same_size(const ImageSize& a, const ImageSize& b, const char* what) {
  if (!(a == b)) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

/// Metric camera-space z per pixel plus a validity mask. Invalid pixels carry
/// depth 0 and are excluded from every statistic.
class DepthMap {
public:
  DepthMap() = default;
  DepthMap(int width, int height) : size_{width, height}, depth_(size_.pixels(), 0.0), valid_(size_.pixels(), 0) {}

  const ImageSize& size() const { return size_; }
  int width() const { return size_.width; }
  int height() const { return size_.height; }
  std::size_t pixels() const { return size_.pixels(); }

  bool valid(std::size_t i) const { return valid_[i] != 0; }
  bool valid(int u, int v) const { return valid(size_.index(u, v)); }
  double depth(std::size_t i) const { return depth_[i]; }
  double depth(int u, int v) const { return depth(size_.index(u, v)); }

  /// Stores z when finite and positive, otherwise marks the pixel invalid.
  void set(std::size_t i, double z) {
    if (std::isfinite(z) && z > 0.0) {
      depth_[i] = z;
      valid_[i] = 1;
    } else {
      invalidate(i);
    }
  }
  void set(int u, int v, double z) { set(size_.index(u, v), z); }
  void invalidate(std::size_t i) {
    depth_[i] = 0.0;
    valid_[i] = 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto b : valid_) n += b;
    return n;
  }

  bool operator==(const DepthMap&) const = default;

private:
  ImageSize size_;
  std::vector<double> depth_;
  std::vector<std::uint8_t> valid_;
};

/// Integer plane ids. Labels 0..num_planes-1 are planes; the value num_planes
/// marks non-planar or unlabeled pixels.
class LabelMap {
public:
  LabelMap() = default;
  LabelMap(int width, int height, int num_planes)
      : size_{width, height}, num_planes_(num_planes), labels_(size_.pixels(), num_planes) {}

  const ImageSize& size() const { return size_; }
  int width() const { return size_.width; }
  int height() const { return size_.height; }
  std::size_t pixels() const { return size_.pixels(); }
  int num_planes() const { return num_planes_; }
  int nonplanar() const { return num_planes_; }

  int operator[](std::size_t i) const { return labels_[i]; }
  int at(int u, int v) const { return labels_[size_.index(u, v)]; }
  bool planar(std::size_t i) const { return labels_[i] < num_planes_; }

  void set(std::size_t i, int label) {
    if (label < 0 || label > num_planes_) {
      throw LabelOutOfRange("label " + std::to_string(label) + " outside 0.." + std::to_string(num_planes_));
    }
    labels_[i] = label;
  }
  void set(int u, int v, int label) { set(size_.index(u, v), label); }

  /// Pixel count per plane label (non-planar excluded).
  std::vector<std::size_t> areas() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(num_planes_), 0);
    for (int l : labels_) {
      if (l < num_planes_) ++out[static_cast<std::size_t>(l)];
    }
    return out;
  }

  const std::vector<int>& data() const { return labels_; }

  bool operator==(const LabelMap&) const = default;

private:
  ImageSize size_;
  int num_planes_ = 0;
  std::vector<int> labels_;
};

/// Per-pixel distributions over K plane channels plus one trailing
/// non-planar channel. Storage is pixel-major: value(i, c) = data[i*C + c].
class ProbMaskStack {
public:
  ProbMaskStack() = default;
  ProbMaskStack(int width, int height, int channels)
      : size_{width, height}, channels_(channels), data_(size_.pixels() * static_cast<std::size_t>(channels), 0.0) {
    require(channels >= 1, "mask stack needs at least one channel");
  }

  const ImageSize& size() const { return size_; }
  int width() const { return size_.width; }
  int height() const { return size_.height; }
  std::size_t pixels() const { return size_.pixels(); }
  int channels() const { return channels_; }

  double& operator()(std::size_t i, int c) { return data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)]; }
  double operator()(std::size_t i, int c) const {
    return data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)];
  }
  double* pixel(std::size_t i) { return data_.data() + i * static_cast<std::size_t>(channels_); }
  const double* pixel(std::size_t i) const { return data_.data() + i * static_cast<std::size_t>(channels_); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Largest deviation of a per-pixel channel sum from 1.
  double normalization_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < pixels(); ++i) {
      double s = 0.0;
      for (int c = 0; c < channels_; ++c) s += (*this)(i, c);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  void require_normalized(double tol = 1e-6) const {
    for (double x : data_) {
      if (!(x >= 0.0)) throw ValidationError("mask stack has negative or NaN probabilities");
    }
    if (normalization_error() > tol) throw ValidationError("mask stack is not normalized per pixel");
  }

  /// One-hot stack with `channels` channels; labels >= channels-1 go to the last channel.
  static ProbMaskStack one_hot(const LabelMap& labels, int channels) {
    ProbMaskStack m(labels.width(), labels.height(), channels);
    for (std::size_t i = 0; i < labels.pixels(); ++i) {
      const int l = std::min(labels[i], channels - 1);
      m(i, l) = 1.0;
    }
    return m;
  }

  bool operator==(const ProbMaskStack&) const = default;

private:
  ImageSize size_;
  int channels_ = 0;
  std::vector<double> data_;
};

using Rgb = std::array<std::uint8_t, 3>;

class RgbImage {
public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {0, 0, 0}) : size_{width, height}, data_(size_.pixels(), fill) {}

  const ImageSize& size() const { return size_; }
  int width() const { return size_.width; }
  int height() const { return size_.height; }
  std::size_t pixels() const { return size_.pixels(); }

  Rgb& operator[](std::size_t i) { return data_[i]; }
  const Rgb& operator[](std::size_t i) const { return data_[i]; }
  const std::vector<Rgb>& data() const { return data_; }

  bool operator==(const RgbImage&) const = default;

private:
  ImageSize size_;
  std::vector<Rgb> data_;
};

/// Squared Euclidean colour distance.
inline int color_distance_sq(const Rgb& a, const Rgb& b) {
  int s = 0;
  for (int k = 0; k < 3; ++k) {
    const int d = static_cast<int>(a[k]) - static_cast<int>(b[k]);
    s += d * d;
  }
  return s;
}

}  // namespace planekit

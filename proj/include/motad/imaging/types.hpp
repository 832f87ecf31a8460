#pragma once
// Core raster and motion types shared by every module.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace motad {

/// Row-major image with 1 (gray) or 3 (RGB) interleaved channels. Values are
/// intensities in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, float fill = 0.f);
  Image(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  /// Pointer to row y of a single-channel image.
  float* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_ * channels_; }
  const float* row(int y) const {
    return data_.data() + static_cast<std::size_t>(y) * width_ * channels_;
  }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Per-pixel displacement in pixels, stored as two planes.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height);
  FlowField(int width, int height, std::vector<float> dx, std::vector<float> dy);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return dx_.size(); }
  bool empty() const { return dx_.empty(); }

  float& dx(int x, int y) { return dx_[static_cast<std::size_t>(y) * width_ + x]; }
  float& dy(int x, int y) { return dy_[static_cast<std::size_t>(y) * width_ + x]; }
  float dx(int x, int y) const { return dx_[static_cast<std::size_t>(y) * width_ + x]; }
  float dy(int x, int y) const { return dy_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> dx_plane() { return dx_; }
  std::span<float> dy_plane() { return dy_; }
  std::span<const float> dx_plane() const { return dx_; }
  std::span<const float> dy_plane() const { return dy_; }

  bool all_finite() const;

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> dx_;
  std::vector<float> dy_;
};

/// Per-pixel selection. Dimensions must match whatever it is applied to.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return bits_.size(); }

  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  double coverage() const;

  Mask operator|(const Mask& o) const;
  Mask inverted() const;

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Image-plane similarity x' = sigma * R(theta) * x + t, about the origin of
/// whatever coordinate frame x is expressed in.
struct SimilarityTransform {
  double tx = 0.0;
  double ty = 0.0;
  double sigma = 1.0;
  double theta = 0.0;

  static SimilarityTransform identity() { return {}; }
  static SimilarityTransform translation(double x, double y) { return {x, y, 1.0, 0.0}; }

  bool finite() const;
  /// sigma > 0 and every field finite.
  bool valid() const;

  void apply(double x, double y, double& ox, double& oy) const;
  SimilarityTransform inverse() const;
  /// (this ∘ other)(x) = this(other(x))
  SimilarityTransform compose(const SimilarityTransform& other) const;

  /// Same mapping expressed with the origin moved to (cx, cy); the returned
  /// translation is the displacement of that point.
  SimilarityTransform about(double cx, double cy) const;
  /// Builds the origin-referenced transform from one expressed about (cx, cy).
  static SimilarityTransform from_about(const SimilarityTransform& centered,
                                        double cx, double cy);
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace motad

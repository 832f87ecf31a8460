#include "motad/imaging/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "motad/errors.hpp"

namespace motad {

namespace {

void check_dims(int w, int h) {
  if (w <= 0 || h <= 0) {
    throw InvalidArgument("raster dimensions must be positive, got " + std::to_string(w) +
                          "x" + std::to_string(h));
  }
}

}  // namespace

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) throw InvalidArgument("image channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) throw InvalidArgument("image channels must be 1 or 3");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw InvalidArgument("image data length does not match dimensions");
  }
  for (float v : data_) {
    if (!(v >= 0.f && v <= 1.f)) throw InvalidArgument("image intensity outside [0,1]");
  }
}

FlowField::FlowField(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  const auto n = static_cast<std::size_t>(width) * height;
  dx_.assign(n, 0.f);
  dy_.assign(n, 0.f);
}

FlowField::FlowField(int width, int height, std::vector<float> dx, std::vector<float> dy)
    : width_(width), height_(height), dx_(std::move(dx)), dy_(std::move(dy)) {
  check_dims(width, height);
  const auto n = static_cast<std::size_t>(width) * height;
  if (dx_.size() != n || dy_.size() != n) {
    throw InvalidArgument("flow plane length does not match dimensions");
  }
}

bool FlowField::all_finite() const {
  auto fin = [](float v) { return std::isfinite(v); };
  return std::all_of(dx_.begin(), dx_.end(), fin) && std::all_of(dy_.begin(), dy_.end(), fin);
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double Mask::coverage() const {
  return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
}

Mask Mask::operator|(const Mask& o) const {
  if (o.width_ != width_ || o.height_ != height_) throw InvalidArgument("mask size mismatch");
  Mask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | o.bits_[i];
  return out;
}

Mask Mask::inverted() const {
  Mask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

bool SimilarityTransform::finite() const {
  return std::isfinite(tx) && std::isfinite(ty) && std::isfinite(sigma) && std::isfinite(theta);
}

bool SimilarityTransform::valid() const { return finite() && sigma > 0.0; }

void SimilarityTransform::apply(double x, double y, double& ox, double& oy) const {
  const double c = sigma * std::cos(theta);
  const double s = sigma * std::sin(theta);
  ox = c * x - s * y + tx;
  oy = s * x + c * y + ty;
}

SimilarityTransform SimilarityTransform::inverse() const {
  if (!(sigma > 0.0)) throw InvalidArgument("similarity transform with non-positive scale");
  SimilarityTransform inv;
  inv.sigma = 1.0 / sigma;
  inv.theta = wrap_angle(-theta);
  const double c = inv.sigma * std::cos(inv.theta);
  const double s = inv.sigma * std::sin(inv.theta);
  inv.tx = -(c * tx - s * ty);
  inv.ty = -(s * tx + c * ty);
  return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& other) const {
  SimilarityTransform out;
  out.sigma = sigma * other.sigma;
  out.theta = wrap_angle(theta + other.theta);
  apply(other.tx, other.ty, out.tx, out.ty);
  return out;
}

SimilarityTransform SimilarityTransform::about(double cx, double cy) const {
  // T(c + p) - c = sR p + (sR c + t - c)
  double ox = 0.0;
  double oy = 0.0;
  apply(cx, cy, ox, oy);
  return {ox - cx, oy - cy, sigma, theta};
}

SimilarityTransform SimilarityTransform::from_about(const SimilarityTransform& centered,
                                                    double cx, double cy) {
  // x' = sR (x - c) + c + t_c  =>  t = c + t_c - sR c
  SimilarityTransform rot{0.0, 0.0, centered.sigma, centered.theta};
  double rx = 0.0;
  double ry = 0.0;
  rot.apply(cx, cy, rx, ry);
  return {cx + centered.tx - rx, cy + centered.ty - ry, centered.sigma, centered.theta};
}

}  // namespace motad

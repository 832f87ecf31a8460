#include "motad/imaging/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "motad/errors.hpp"

namespace motad {

namespace {

void resize_plane(const float* src, int sw, int sh, int src_stride, float* dst, int dw,
                  int dh, int dst_stride) {
  const double fx = static_cast<double>(sw) / dw;
  const double fy = static_cast<double>(sh) / dh;
  for (int y = 0; y < dh; ++y) {
    const double sy = (y + 0.5) * fy - 0.5;
    for (int x = 0; x < dw; ++x) {
      const double sx = (x + 0.5) * fx - 0.5;
      // src_stride lets interleaved channels reuse the plane sampler
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, sw - 1);
      const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, sh - 1);
      const int x1 = std::min(x0 + 1, sw - 1);
      const int y1 = std::min(y0 + 1, sh - 1);
      const double ax = std::clamp(sx - x0, 0.0, 1.0);
      const double ay = std::clamp(sy - y0, 0.0, 1.0);
      auto at = [&](int xx, int yy) {
        return static_cast<double>(src[(static_cast<std::size_t>(yy) * sw + xx) * src_stride]);
      };
      const double top = at(x0, y0) * (1.0 - ax) + at(x1, y0) * ax;
      const double bot = at(x0, y1) * (1.0 - ax) + at(x1, y1) * ax;
      dst[(static_cast<std::size_t>(y) * dw + x) * dst_stride] =
          static_cast<float>(top * (1.0 - ay) + bot * ay);
    }
  }
}

struct CropGeometry {
  int rw, rh;  // resized size
  int ox, oy;  // crop origin in resized image
};

CropGeometry crop_geometry(int w, int h, int side) {
  if (side <= 0) throw InvalidArgument("crop side must be positive");
  if (side % 2 != 0) throw InvalidArgument("crop side must be even");
  CropGeometry g{};
  if (w <= h) {
    g.rw = side;
    g.rh = static_cast<int>(std::floor(static_cast<double>(h) * side / w + 0.5));
  } else {
    g.rh = side;
    g.rw = static_cast<int>(std::floor(static_cast<double>(w) * side / h + 0.5));
  }
  if (side > g.rw || side > g.rh) {
    throw InvalidArgument("crop side " + std::to_string(side) + " exceeds resized image");
  }
  g.ox = (g.rw - side) / 2;
  g.oy = (g.rh - side) / 2;
  return g;
}

}  // namespace

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const float v = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] + 0.114f * src[3 * i + 2];
    dst[i] = std::clamp(v, 0.f, 1.f);
  }
  return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("resize target must be positive");
  if (width == img.width() && height == img.height()) return img;
  Image out(width, height, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    resize_plane(img.data().data() + c, img.width(), img.height(), img.channels(),
                 out.data().data() + c, width, height, img.channels());
  }
  return out;
}

Image resize_center_crop(const Image& img, int side) {
  const CropGeometry g = crop_geometry(img.width(), img.height(), side);
  const Image resized = resize_bilinear(img, g.rw, g.rh);
  if (g.rw == side && g.rh == side) return resized;
  Image out(side, side, img.channels());
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = resized.at(x + g.ox, y + g.oy, c);
    }
  }
  return out;
}

FlowField resize_center_crop(const FlowField& flow, int side) {
  const CropGeometry g = crop_geometry(flow.width(), flow.height(), side);
  const double sx = static_cast<double>(g.rw) / flow.width();
  const double sy = static_cast<double>(g.rh) / flow.height();
  std::vector<float> rx(static_cast<std::size_t>(g.rw) * g.rh);
  std::vector<float> ry(rx.size());
  resize_plane(flow.dx_plane().data(), flow.width(), flow.height(), 1, rx.data(), g.rw, g.rh, 1);
  resize_plane(flow.dy_plane().data(), flow.width(), flow.height(), 1, ry.data(), g.rw, g.rh, 1);
  FlowField out(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const std::size_t i = static_cast<std::size_t>(y + g.oy) * g.rw + (x + g.ox);
      out.dx(x, y) = static_cast<float>(rx[i] * sx);
      out.dy(x, y) = static_cast<float>(ry[i] * sy);
    }
  }
  return out;
}

std::pair<float, float> masked_median(const FlowField& flow, const Mask& mask) {
  if (mask.width() != flow.width() || mask.height() != flow.height()) {
    throw InvalidArgument("mask does not match flow dimensions");
  }
  std::vector<float> xs;
  std::vector<float> ys;
  xs.reserve(mask.count());
  ys.reserve(xs.capacity());
  auto dx = flow.dx_plane();
  auto dy = flow.dy_plane();
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    if (mask[i]) {
      xs.push_back(dx[i]);
      ys.push_back(dy[i]);
    }
  }
  if (xs.empty()) throw EmptySelection("masked_median: mask selects no pixels");
  const auto k = (xs.size() - 1) / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end());
  std::nth_element(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(k), ys.end());
  return {xs[k], ys[k]};
}

float sample_bilinear(const float* plane, int width, int height, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const float* r0 = plane + static_cast<std::size_t>(y0) * width;
  const float* r1 = plane + static_cast<std::size_t>(y1) * width;
  const double top = r0[x0] + ax * (r0[x1] - r0[x0]);
  const double bot = r1[x0] + ax * (r1[x1] - r1[x0]);
  return static_cast<float>(top + ay * (bot - top));
}

Image warp_by_similarity(const Image& img, const SimilarityTransform& tf) {
  if (!tf.valid()) throw InvalidArgument("warp_by_similarity: transform not finite");
  const SimilarityTransform inv = tf.inverse();
  const int w = img.width();
  const int h = img.height();
  const int nc = img.channels();
  Image out(w, h, nc);
  std::vector<float> plane(static_cast<std::size_t>(w) * h);
  for (int c = 0; c < nc; ++c) {
    auto src = img.data();
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = src[i * nc + c];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sx = 0.0;
        double sy = 0.0;
        inv.apply(x, y, sx, sy);
        out.at(x, y, c) = std::clamp(sample_bilinear(plane.data(), w, h, sx, sy), 0.f, 1.f);
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  if (img.channels() != 1) throw InvalidArgument("gaussian_blur expects a gray image");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  const int w = img.width();
  const int h = img.height();
  std::vector<float> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

std::vector<float> flow_magnitude(const FlowField& flow) {
  std::vector<float> mag(flow.pixel_count());
  auto dx = flow.dx_plane();
  auto dy = flow.dy_plane();
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(dx[i], dy[i]);
  return mag;
}

FlowField zero_inside(const FlowField& flow, const Mask& mask) {
  if (mask.width() != flow.width() || mask.height() != flow.height()) {
    throw InvalidArgument("mask does not match flow dimensions");
  }
  FlowField out = flow;
  auto dx = out.dx_plane();
  auto dy = out.dy_plane();
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    if (mask[i]) {
      dx[i] = 0.f;
      dy[i] = 0.f;
    }
  }
  return out;
}

}  // namespace motad

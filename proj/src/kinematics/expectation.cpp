#include "motad/kinematics/expectation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numeric>

#include "motad/errors.hpp"
#include "motad/imaging/ops.hpp"

namespace motad::kinematics {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidArgument("camera intrinsics need fx, fy > 0 and a finite principal point");
  }
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void RelativeCameraMotion::validate() const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-9) || !(std::fabs(rotation.determinant() - 1.0) <= 1e-9)) {
    throw InvalidArgument("camera rotation is not a proper rotation matrix");
  }
  if (!translation.allFinite()) throw InvalidArgument("camera translation not finite");
}

bool RelativeCameraMotion::is_pure_translation() const {
  return rotation == Eigen::Matrix3d::Identity();
}

DepthModel DepthModel::uniform(double z) {
  if (!(z > 0.0)) throw InvalidArgument("depth must be positive");
  DepthModel d;
  d.z_ = z;
  return d;
}

DepthModel DepthModel::per_point(std::vector<double> depths) {
  if (depths.empty()) throw InvalidArgument("per-point depth list is empty");
  for (double z : depths) {
    if (!(z > 0.0)) throw InvalidArgument("depth must be positive");
  }
  DepthModel d;
  d.per_point_ = std::move(depths);
  return d;
}

double DepthModel::depth_at(std::size_t i) const {
  if (per_point_.empty()) return z_;
  if (i >= per_point_.size()) throw InvalidArgument("no depth for point index");
  return per_point_[i];
}

std::vector<Correspondence> expected_correspondences(const CameraIntrinsics& k,
                                                     const RelativeCameraMotion& motion,
                                                     const DepthModel& depth,
                                                     std::span<const Point2> points) {
  k.validate();
  motion.validate();
  if (points.size() < 2) throw InvalidArgument("need at least two points");
  if (!depth.is_uniform() && depth.point_count() != points.size()) {
    throw InvalidArgument("per-point depth count does not match point count");
  }
  const Eigen::Matrix3d km = k.matrix();
  const bool translation_only = motion.is_pure_translation();
  const Eigen::Matrix3d h = km * motion.rotation * km.inverse();
  const Eigen::Vector3d kt = km * motion.translation;

  std::vector<Correspondence> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double z = depth.depth_at(i);
    const Eigen::Vector3d x(points[i].x, points[i].y, 1.0);
    const Eigen::Vector3d xp = translation_only ? Eigen::Vector3d(x + kt / z) : Eigen::Vector3d(h * x + kt / z);
    out.push_back({points[i], {xp.x() / xp.z(), xp.y() / xp.z()}});
  }
  return out;
}

std::vector<Point2> interior_grid(int width, int height, int n) {
  if (n < 2) throw InvalidArgument("grid needs at least 2x2 points");
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      pts.push_back({(i + 0.5) * width / n - 0.5, (j + 0.5) * height / n - 0.5});
    }
  }
  return pts;
}

SimilarityTransform fit_similarity(std::span<const Correspondence> pairs) {
  if (pairs.size() < 2) throw InvalidArgument("fit_similarity needs at least two pairs");
  using C = std::complex<double>;
  C mx{};
  C my{};
  for (const auto& p : pairs) {
    mx += C(p.from.x, p.from.y);
    my += C(p.to.x, p.to.y);
  }
  const double n = static_cast<double>(pairs.size());
  mx /= n;
  my /= n;
  // y - my = a (x - mx) in the complex plane, a = sigma e^{i theta}
  C cross{};
  double spread = 0.0;
  for (const auto& p : pairs) {
    const C dx = C(p.from.x, p.from.y) - mx;
    const C dy = C(p.to.x, p.to.y) - my;
    cross += std::conj(dx) * dy;
    spread += std::norm(dx);
  }
  if (spread <= 1e-18 * std::max(1.0, std::norm(mx))) {
    throw DegenerateConfiguration("fit_similarity: source points coincide");
  }
  const C a = cross / spread;
  if (std::abs(a) == 0.0) throw DegenerateConfiguration("fit_similarity: zero scale");
  const C t = my - a * mx;
  return {t.real(), t.imag(), std::abs(a), std::arg(a)};
}

SimilarityTransform expected_transform(const CameraIntrinsics& k, const RelativeCameraMotion& motion,
                                       const DepthModel& depth, int width, int height, int grid) {
  const auto pts = interior_grid(width, height, grid);
  const auto pairs = expected_correspondences(k, motion, depth, pts);
  return fit_similarity(pairs);
}

double camera_error(const SimilarityTransform& expected, const SimilarityTransform& observed,
                    const CameraErrorWeights& w) {
  double e = w.translation * (std::fabs(expected.tx - observed.tx) + std::fabs(expected.ty - observed.ty));
  if (w.scale != 0.0) e += w.scale * std::fabs(expected.sigma - observed.sigma);
  if (w.rotation != 0.0) e += w.rotation * std::fabs(wrap_angle(expected.theta - observed.theta));
  return e;
}

namespace {

// Union-find over pixel indices for two-pass component labelling.
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Marks every 4-connected background region that does not reach the border
// as foreground.
Mask fill_enclosed(const Mask& fg) {
  const int w = fg.width();
  const int h = fg.height();
  DisjointSet ds(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (fg.get(x, y)) continue;
      const int i = y * w + x;
      if (x > 0 && !fg.get(x - 1, y)) ds.unite(i, i - 1);
      if (y > 0 && !fg.get(x, y - 1)) ds.unite(i, i - w);
    }
  }
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      if (border && !fg.get(x, y)) outside[ds.find(y * w + x)] = 1;
    }
  }
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.set(x, y, fg.get(x, y) || !outside[ds.find(y * w + x)]);
    }
  }
  return out;
}

Mask dilate(const Mask& m, int r) {
  if (r <= 0) return m;
  const int w = m.width();
  const int h = m.height();
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.get(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx >= 0 && yy >= 0 && xx < w && yy < h) out.set(xx, yy, true);
        }
      }
    }
  }
  return out;
}

}  // namespace

Mask body_mask(const Image& rendered, float threshold, int dilation_radius) {
  const Image gray = to_gray(rendered);
  Mask fg(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) fg.set(x, y, gray.at(x, y) >= threshold);
  }
  if (!fg.any()) return fg;
  return dilate(fill_enclosed(fg), dilation_radius);
}

double body_error(const FlowField& observed, const FlowField& rendered_flow, const Mask& mask) {
  if (observed.width() != rendered_flow.width() || observed.height() != rendered_flow.height() ||
      mask.width() != observed.width() || mask.height() != observed.height()) {
    throw InvalidArgument("body_error: dimension mismatch");
  }
  if (!mask.any()) return 0.0;
  const auto [ox, oy] = masked_median(observed, mask);
  const auto [jx, jy] = masked_median(rendered_flow, mask);
  return std::fabs(static_cast<double>(jx) - ox) + std::fabs(static_cast<double>(jy) - oy);
}

}  // namespace motad::kinematics

#include "motad/registration/fourier_mellin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "motad/errors.hpp"
#include "motad/registration/fft.hpp"

namespace motad::registration {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr int kMaskTaper = 4;

double variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::vector<double> to_plane(const Image& img) {
  if (img.channels() != 1) throw InvalidArgument("registration expects single-channel images");
  auto d = img.data();
  return {d.begin(), d.end()};
}

double sample(const std::vector<double>& p, int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  auto at = [&](int xx, int yy) { return p[static_cast<std::size_t>(yy) * w + xx]; };
  const double top = at(x0, y0) + ax * (at(x1, y0) - at(x0, y0));
  const double bot = at(x0, y1) + ax * (at(x1, y1) - at(x0, y1));
  return top + ay * (bot - top);
}

// Subpixel offset of a peak from three samples (left, centre, right).
double parabolic(double l, double c, double r) {
  const double den = l - 2.0 * c + r;
  if (std::fabs(den) < 1e-15) return 0.0;
  return std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
}

// Radially symmetric Hann window about the image centre, zero outside the
// inscribed circle, so rotating the content about the centre rotates the
// windowed image too.
std::vector<double> hann(int w, int h) {
  std::vector<double> win(static_cast<std::size_t>(w) * h);
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double radius = std::min(w, h) / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = std::hypot(x - cx, y - cy) / radius;
      win[static_cast<std::size_t>(y) * w + x] = r < 1.0 ? 0.5 * (1.0 + std::cos(kPi * r)) : 0.0;
    }
  }
  return win;
}

// 0 on the mask, rising as a raised cosine to 1 at `radius` pixels from it, so
// the mean-filled region leaves no hard static edge in either spectrum.
std::vector<double> mask_taper(const Mask& mask, int radius) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<double> out(mask.pixel_count(), 1.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.get(x, y)) {
        out[static_cast<std::size_t>(y) * w + x] = 0.0;
        continue;
      }
      double d2 = static_cast<double>(radius) * radius;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h || !mask.get(xx, yy)) continue;
          d2 = std::min(d2, static_cast<double>(dx * dx + dy * dy));
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = 0.5 * (1.0 - std::cos(kPi * std::sqrt(d2) / radius));
    }
  }
  return out;
}

std::vector<double> windowed(const std::vector<double>& p, const std::vector<double>& win) {
  double m = 0.0;
  for (double v : p) m += v;
  m /= static_cast<double>(p.size());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (p[i] - m) * win[i];
  return out;
}

// Centred log-magnitude spectrum of p zero-padded by `pad`, with the
// Reddy-Chatterji high-pass emphasis. Padding interpolates the spectrum so the
// low radii that dominate smooth images are sampled more densely.
std::vector<double> emphasized_magnitude(const std::vector<double>& p, int w, int h, int pad) {
  const int pw = w * pad;
  const int ph = h * pad;
  Fft2d fft(pw, ph);
  std::vector<cplx> buf(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      buf[static_cast<std::size_t>(y) * pw + x] = p[static_cast<std::size_t>(y) * w + x];
    }
  }
  fft.forward(buf);
  std::vector<double> mag(buf.size());
  for (int y = 0; y < ph; ++y) {
    const int sy = (y + ph / 2) % ph;  // fftshift
    const double eta = static_cast<double>(y - ph / 2) / ph;
    for (int x = 0; x < pw; ++x) {
      const int sx = (x + pw / 2) % pw;
      const double xi = static_cast<double>(x - pw / 2) / pw;
      const double c = std::cos(kPi * xi) * std::cos(kPi * eta);
      const double hp = (1.0 - c) * (2.0 - c);
      mag[static_cast<std::size_t>(y) * pw + x] =
          hp * std::log1p(std::abs(buf[static_cast<std::size_t>(sy) * pw + sx]));
    }
  }
  return mag;
}

// Rows = angle in [0, pi), columns = log radius from log(rmin) to log(rmax).
// A Hann taper along the radius axis removes the wrap discontinuity that the
// angle axis does not have.
std::vector<double> log_polar(const std::vector<double>& mag, int w, int h, int n_theta,
                              int n_rho, double log_rmin, double log_rmax) {
  std::vector<double> out(static_cast<std::size_t>(n_theta) * n_rho);
  const double cx = w / 2;
  const double cy = h / 2;
  const double step = (log_rmax - log_rmin) / n_rho;
  for (int a = 0; a < n_theta; ++a) {
    const double th = kPi * a / n_theta;
    const double ct = std::cos(th);
    const double st = std::sin(th);
    for (int j = 0; j < n_rho; ++j) {
      const double r = std::exp(log_rmin + step * j);
      const double taper = 0.5 * (1.0 - std::cos(2.0 * kPi * (j + 0.5) / n_rho));
      out[static_cast<std::size_t>(a) * n_rho + j] =
          taper * sample(mag, w, h, cx + r * ct, cy + r * st);
    }
  }
  return out;
}

// Similarity about (cx, cy): S(c + p) = c + sigma R(theta) (p + t).
struct CentredSimilarity {
  double sigma = 1.0;
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  void map(double x, double y, double& ox, double& oy) const {
    const double c = sigma * std::cos(theta);
    const double s = sigma * std::sin(theta);
    const double px = x - cx + tx;
    const double py = y - cy + ty;
    ox = c * px - s * py + cx;
    oy = s * px + c * py + cy;
  }
};

// b'(x) = b(S(x)).
std::vector<double> undo_similarity(const std::vector<double>& b, int w, int h,
                                    const CentredSimilarity& tf) {
  std::vector<double> out(b.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0;
      double sy = 0.0;
      tf.map(x, y, sx, sy);
      out[static_cast<std::size_t>(y) * w + x] = sample(b, w, h, sx, sy);
    }
  }
  return out;
}

// Mask pulled back through the same mapping (nearest neighbour), so it
// covers the masked content of b'.
Mask undo_similarity(const Mask& m, const CentredSimilarity& tf) {
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      double sx = 0.0;
      double sy = 0.0;
      tf.map(x, y, sx, sy);
      const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, m.width() - 1);
      const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, m.height() - 1);
      out.set(x, y, m.get(ix, iy));
    }
  }
  return out;
}

// Masked samples replaced by the mean of the unmasked ones.
void fill_masked(std::vector<double>& p, const Mask& mask) {
  const std::size_t kept = mask.pixel_count() - mask.count();
  if (kept == 0) return;
  double mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) mean += p[i];
  }
  mean /= static_cast<double>(kept);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (mask[i]) p[i] = mean;
  }
}

std::vector<double> analysis_window(int w, int h, const Mask* mask) {
  std::vector<double> win = hann(w, h);
  if (mask && mask->any()) {
    const auto taper = mask_taper(*mask, kMaskTaper);
    for (std::size_t i = 0; i < win.size(); ++i) win[i] *= taper[i];
  }
  return win;
}

}  // namespace

PhaseCorrelation phase_correlate(const std::vector<double>& a, const std::vector<double>& b,
                                 int width, int height, double peak_sigma) {
  const auto n = static_cast<std::size_t>(width) * height;
  if (a.size() != n || b.size() != n) throw InvalidArgument("phase_correlate: size mismatch");
  if (!(peak_sigma >= 0.0)) throw InvalidArgument("phase_correlate: negative peak width");
  if (variance(a) < 1e-12 || variance(b) < 1e-12) return {};

  Fft2d fft(width, height);
  std::vector<cplx> fa(a.begin(), a.end());
  std::vector<cplx> fb(b.begin(), b.end());
  fft.forward(fa);
  fft.forward(fb);
  double max_mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fb[i] *= std::conj(fa[i]);
    max_mag = std::max(max_mag, std::abs(fb[i]));
  }
  auto signed_freq = [](int k, int len) { return k <= len / 2 ? k : k - len; };
  const double floor = max_mag * 1e-12;
  const double gs = peak_sigma;
  double hsum = 0.0;
  for (int ky = 0; ky < height; ++ky) {
    const double wy = 2.0 * kPi * signed_freq(ky, height) / height;
    for (int kx = 0; kx < width; ++kx) {
      const double wx = 2.0 * kPi * signed_freq(kx, width) / width;
      const double hw = std::exp(-0.5 * gs * gs * (wx * wx + wy * wy));
      auto& v = fb[static_cast<std::size_t>(ky) * width + kx];
      const double m = std::abs(v);
      v = m > floor ? hw * v / m : cplx{};
      hsum += hw;
    }
  }
  fft.inverse(fb);
  for (auto& v : fb) v *= static_cast<double>(n) / hsum;

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (fb[i].real() > fb[best].real()) best = i;
  }
  const int px = static_cast<int>(best % width);
  const int py = static_cast<int>(best / width);
  const double ix = px > width / 2 ? px - width : px;
  const double iy = py > height / 2 ? py - height : py;

  PhaseCorrelation out;
  auto r = [&](int x, int y) {
    x = (x + width) % width;
    y = (y + height) % height;
    return fb[static_cast<std::size_t>(y) * width + x].real();
  };
  const double c = r(px, py);
  // A Gaussian-weighted peak is close to a Gaussian, so fit in log space.
  auto fit = [&](double l, double mid, double rr) {
    if (l > 0 && rr > 0 && mid > 0) return parabolic(std::log(l), std::log(mid), std::log(rr));
    return parabolic(l, mid, rr);
  };
  out.tx = ix + (width > 2 ? fit(r(px - 1, py), c, r(px + 1, py)) : 0.0);
  out.ty = iy + (height > 2 ? fit(r(px, py - 1), c, r(px, py + 1)) : 0.0);
  out.peak_response = std::clamp(c, 0.0, 1.0);
  return out;
}

PhaseCorrelation phase_correlate(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidArgument("phase_correlate: image shapes differ");
  return phase_correlate(to_plane(a), to_plane(b), a.width(), a.height());
}

RegistrationResult register_similarity(const Image& a, const Image& b, const Mask* body_mask,
                                       const RegistrationOptions& opts) {
  if (!a.same_shape(b)) throw InvalidArgument("register_similarity: image shapes differ");
  if (opts.refine_iterations < 0) throw InvalidArgument("register_similarity: negative refinement count");
  const int w = a.width();
  const int h = a.height();
  const std::vector<double> raw_a = to_plane(a);
  const std::vector<double> raw_b = to_plane(b);
  std::vector<double> pa = raw_a;
  std::vector<double> pb = raw_b;

  RegistrationResult result;
  if (body_mask) {
    if (body_mask->width() != w || body_mask->height() != h) {
      throw InvalidArgument("register_similarity: mask size mismatch");
    }
    result.low_confidence = body_mask->coverage() > opts.max_masked_fraction;
    fill_masked(pa, *body_mask);
    fill_masked(pb, *body_mask);
  }
  if (variance(pa) < 1e-12 || variance(pb) < 1e-12) return result;

  const std::vector<double> win = analysis_window(w, h, body_mask);
  const std::vector<double> wa = windowed(pa, win);

  // rotation and scale
  constexpr int kPad = 2;
  const int n_theta = opts.log_polar_angles > 0 ? opts.log_polar_angles : 2 * std::max(w, h);
  const int n_rho = opts.log_polar_radii > 0 ? opts.log_polar_radii : 2 * std::max(w, h);
  const double log_rmin = std::log(static_cast<double>(kPad));
  const double log_rmax = std::log(kPad * std::min(w, h) / 2.0);
  const auto lpa = log_polar(emphasized_magnitude(wa, w, h, kPad), kPad * w, kPad * h, n_theta,
                             n_rho, log_rmin, log_rmax);
  const auto lpb = log_polar(emphasized_magnitude(windowed(pb, win), w, h, kPad), kPad * w,
                             kPad * h, n_theta, n_rho, log_rmin, log_rmax);
  const PhaseCorrelation rs = phase_correlate(lpa, lpb, n_rho, n_theta, 2.0);
  const double theta0 = rs.ty * kPi / n_theta;
  const double sigma = std::exp(-rs.tx * (log_rmax - log_rmin) / n_rho);

  // translation, resolving the theta / theta + pi ambiguity of the spectrum
  CentredSimilarity est{sigma, theta0, 0.0, 0.0, (w - 1) / 2.0, (h - 1) / 2.0};
  PhaseCorrelation best;
  bool first = true;
  for (double th : {theta0, theta0 + kPi}) {
    CentredSimilarity cand = est;
    cand.theta = th;
    const PhaseCorrelation t = phase_correlate(wa, windowed(undo_similarity(pb, w, h, cand), win), w, h);
    if (first || t.peak_response > best.peak_response) {
      best = t;
      est.theta = th;
      first = false;
    }
  }
  est.theta = wrap_angle(est.theta);
  est.tx = best.tx;
  est.ty = best.ty;

  // The analysis window does not move with the content, which pulls the
  // estimate towards zero shift in proportion to the shift. Re-correlating
  // against b with the current estimate undone shrinks that residual.
  for (int it = 0; it < opts.refine_iterations; ++it) {
    std::vector<double> ra = raw_a;
    std::vector<double> rb = undo_similarity(raw_b, w, h, est);
    std::vector<double> rwin = win;
    if (body_mask) {
      const Mask both = *body_mask | undo_similarity(*body_mask, est);
      fill_masked(ra, both);
      fill_masked(rb, both);
      rwin = analysis_window(w, h, &both);
    }
    const PhaseCorrelation r = phase_correlate(windowed(ra, rwin), windowed(rb, rwin), w, h);
    est.tx += r.tx;
    est.ty += r.ty;
    best.peak_response = r.peak_response;
  }

  double ox = 0.0;
  double oy = 0.0;
  est.map(0.0, 0.0, ox, oy);
  // b(S(x)) ~ a(x): content at x in a appears at S(x) in b.
  result.transform = {ox, oy, est.sigma, est.theta};
  result.peak_response = result.low_confidence ? 0.0 : best.peak_response;
  return result;
}

}  // namespace motad::registration

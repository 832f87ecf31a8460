#include "motad/flow/tvl1.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "motad/errors.hpp"
#include "motad/imaging/ops.hpp"
#include "motad/log.hpp"
#include "motad/simd/kernels.hpp"

namespace motad::flow {

namespace {

constexpr double kPresmoothSigma = 0.8;

struct Plane {
  int w = 0;
  int h = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int w_, int h_, float fill = 0.f)
      : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, fill) {}
  float* row(int y) { return v.data() + static_cast<std::size_t>(y) * w; }
  const float* row(int y) const { return v.data() + static_cast<std::size_t>(y) * w; }
  float at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::size_t size() const { return v.size(); }
};

Plane from_image(const Image& img, float scale) {
  Plane p(img.width(), img.height());
  auto d = img.data();
  for (std::size_t i = 0; i < p.size(); ++i) p.v[i] = d[i] * scale;
  return p;
}

Plane blur(const Plane& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += k[i + radius];
  }
  for (auto& x : k) x = static_cast<float>(x / sum);
  Plane tmp(in.w, in.h);
  for (int y = 0; y < in.h; ++y) {
    const float* src = in.row(y);
    float* dst = tmp.row(y);
    for (int x = 0; x < in.w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * src[std::clamp(x + i, 0, in.w - 1)];
      dst[x] = acc;
    }
  }
  Plane out(in.w, in.h);
  const auto& kt = simd::kernels();
  for (int y = 0; y < in.h; ++y) {
    float* dst = out.row(y);
    for (int i = -radius; i <= radius; ++i) {
      kt.axpy_f(k[i + radius], tmp.row(std::clamp(y + i, 0, in.h - 1)), dst,
                static_cast<std::size_t>(in.w));
    }
  }
  return out;
}

// Bilinear resample with pixel-centre alignment.
Plane resample(const Plane& in, int w, int h) {
  Plane out(w, h);
  const double fx = static_cast<double>(in.w) / w;
  const double fy = static_cast<double>(in.h) / h;
  for (int y = 0; y < h; ++y) {
    const double sy = (y + 0.5) * fy - 0.5;
    for (int x = 0; x < w; ++x) {
      out.row(y)[x] = sample_bilinear(in.v.data(), in.w, in.h, (x + 0.5) * fx - 0.5, sy);
    }
  }
  return out;
}

void centered_gradient(const Plane& in, Plane& gx, Plane& gy) {
  gx = Plane(in.w, in.h);
  gy = Plane(in.w, in.h);
  for (int y = 0; y < in.h; ++y) {
    const float* up = in.row(std::max(y - 1, 0));
    const float* dn = in.row(std::min(y + 1, in.h - 1));
    const float* r = in.row(y);
    const float sy = (y == 0 || y == in.h - 1) ? 1.f : 0.5f;
    for (int x = 0; x < in.w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, in.w - 1);
      const float sx = (x == 0 || x == in.w - 1) ? 1.f : 0.5f;
      gx.row(y)[x] = in.w > 1 ? sx * (r[xr] - r[xl]) : 0.f;
      gy.row(y)[x] = in.h > 1 ? sy * (dn[x] - up[x]) : 0.f;
    }
  }
}

void warp_plane(const Plane& in, const Plane& u1, const Plane& u2, Plane& out) {
  out = Plane(in.w, in.h);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * in.w + x;
      out.v[i] = sample_bilinear(in.v.data(), in.w, in.h, x + u1.v[i], y + u2.v[i]);
    }
  }
}

void median3x3(Plane& p) {
  const Plane src = p;
  std::array<float, 9> win{};
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const float* r = src.row(std::clamp(y + dy, 0, p.h - 1));
        for (int dx = -1; dx <= 1; ++dx) win[k++] = r[std::clamp(x + dx, 0, p.w - 1)];
      }
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      p.row(y)[x] = win[4];
    }
  }
}

// c1/c2 hold the candidate primal iterate; *x/*y planes are forward
// gradients of the accepted iterate (u) and of the candidate (c).
struct Workspace {
  Plane u1x, u1y, u2x, u2y, c1, c2, c1x, c1y, c2x, c2y, div1, div2, v1, v2;
  explicit Workspace(int w, int h)
      : u1x(w, h), u1y(w, h), u2x(w, h), u2y(w, h), c1(w, h), c2(w, h), c1x(w, h), c1y(w, h),
        c2x(w, h), c2y(w, h), div1(w, h), div2(w, h), v1(w, h), v2(w, h) {}
};

void forward_gradient(const simd::KernelTable& kt, const Plane& u, Plane& ux, Plane& uy) {
  const auto w = static_cast<std::size_t>(u.w);
  for (int y = 0; y < u.h; ++y) {
    kt.forward_diff(u.row(y), ux.row(y), w);
    if (y + 1 < u.h) {
      kt.sub_f(u.row(y + 1), u.row(y), uy.row(y), w);
    } else {
      std::fill_n(uy.row(y), w, 0.f);
    }
  }
}

void divergence(const simd::KernelTable& kt, const Plane& p1, const Plane& p2, Plane& div) {
  const auto w = static_cast<std::size_t>(p1.w);
  for (int y = 0; y < p1.h; ++y) {
    kt.divergence_row(p1.row(y), p2.row(y), y > 0 ? p2.row(y - 1) : nullptr, div.row(y), w);
  }
}

double total_variation(const Plane& ax, const Plane& ay, const Plane& bx, const Plane& by) {
  double tv = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    tv += std::hypot(ax.v[i], ay.v[i]) + std::hypot(bx.v[i], by.v[i]);
  }
  return tv;
}

double squared_distance(const Plane& a1, const Plane& a2, const Plane& b1, const Plane& b2) {
  double s = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    const double d1 = static_cast<double>(a1.v[i]) - b1.v[i];
    const double d2 = static_cast<double>(a2.v[i]) - b2.v[i];
    s += d1 * d1 + d2 * d2;
  }
  return s;
}

double data_term(const Plane& v1, const Plane& v2, const Plane& rho_c, const Plane& gx,
                 const Plane& gy) {
  double d = 0.0;
  for (std::size_t i = 0; i < v1.size(); ++i) {
    d += std::fabs(static_cast<double>(rho_c.v[i]) + gx.v[i] * v1.v[i] + gy.v[i] * v2.v[i]);
  }
  return d;
}

// One pyramid level: refines (u1, u2) in place.
void solve_level(const Plane& i0, const Plane& i1, Plane& u1, Plane& u2, const TvL1Params& p,
                 std::vector<std::vector<double>>* energy_trace) {
  const auto& kt = simd::kernels();
  const int w = i0.w;
  const int h = i0.h;
  const std::size_t n = i0.size();
  const auto lt = static_cast<float>(p.lambda * p.theta);
  const auto theta = static_cast<float>(p.theta);
  const auto taut = static_cast<float>(p.tau / p.theta);
  const double stop = p.stop_eps * p.stop_eps;

  Plane i1x;
  Plane i1y;
  centered_gradient(i1, i1x, i1y);

  Workspace ws(w, h);
  Plane p11(w, h), p12(w, h), p21(w, h), p22(w, h);
  Plane i1w, i1wx, i1wy, grad(w, h), rho_c(w, h);

  for (int warp = 0; warp < p.n_warps; ++warp) {
    warp_plane(i1, u1, u2, i1w);
    warp_plane(i1x, u1, u2, i1wx);
    warp_plane(i1y, u1, u2, i1wy);
    for (std::size_t i = 0; i < n; ++i) {
      grad.v[i] = i1wx.v[i] * i1wx.v[i] + i1wy.v[i] * i1wy.v[i];
      rho_c.v[i] = i1w.v[i] - i1wx.v[i] * u1.v[i] - i1wy.v[i] * u2.v[i] - i0.v[i];
    }
    std::vector<double>* trace = nullptr;
    if (energy_trace) trace = &energy_trace->emplace_back();

    // Relaxed energy TV(u) + |u - v|^2 / (2 theta) + lambda |rho(v)|. The v-step
    // minimizes it exactly; the u-step takes one dual projection step and the
    // resulting candidate replaces u only when it lowers TV(.) + |. - v|^2 / (2 theta),
    // so the energy never increases within a warp.
    const double coupling = 1.0 / (2.0 * p.theta);
    forward_gradient(kt, u1, ws.u1x, ws.u1y);
    forward_gradient(kt, u2, ws.u2x, ws.u2y);
    double tv_u = total_variation(ws.u1x, ws.u1y, ws.u2x, ws.u2y);
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < p.n_iters && err > stop; ++it) {
      kt.tvl1_threshold(rho_c.v.data(), i1wx.v.data(), i1wy.v.data(), grad.v.data(),
                        u1.v.data(), u2.v.data(), ws.v1.v.data(), ws.v2.v.data(), lt, n);
      divergence(kt, p11, p12, ws.div1);
      divergence(kt, p21, p22, ws.div2);
      ws.c1.v = u1.v;
      ws.c2.v = u2.v;
      err = kt.tvl1_primal(ws.v1.v.data(), ws.v2.v.data(), ws.div1.v.data(), ws.div2.v.data(),
                           ws.c1.v.data(), ws.c2.v.data(), theta, n) /
            static_cast<double>(n);
      forward_gradient(kt, ws.c1, ws.c1x, ws.c1y);
      forward_gradient(kt, ws.c2, ws.c2x, ws.c2y);
      const double tv_c = total_variation(ws.c1x, ws.c1y, ws.c2x, ws.c2y);
      const double f_c = tv_c + coupling * squared_distance(ws.c1, ws.c2, ws.v1, ws.v2);
      const double f_u = tv_u + coupling * squared_distance(u1, u2, ws.v1, ws.v2);
      const bool accept = f_c <= f_u;
      if (trace) {
        trace->push_back(std::min(f_c, f_u) +
                         p.lambda * data_term(ws.v1, ws.v2, rho_c, i1wx, i1wy));
      }
      kt.tvl1_dual(ws.c1x.v.data(), ws.c1y.v.data(), ws.c2x.v.data(), ws.c2y.v.data(),
                   p11.v.data(), p12.v.data(), p21.v.data(), p22.v.data(), taut, n);
      if (accept) {
        std::swap(u1.v, ws.c1.v);
        std::swap(u2.v, ws.c2.v);
        std::swap(ws.u1x.v, ws.c1x.v);
        std::swap(ws.u1y.v, ws.c1y.v);
        std::swap(ws.u2x.v, ws.c2x.v);
        std::swap(ws.u2y.v, ws.c2y.v);
        tv_u = tv_c;
      }
    }
    if (p.median_filter) {
      median3x3(u1);
      median3x3(u2);
    }
  }
}

}  // namespace

void TvL1Params::validate() const {
  if (!(lambda > 0 && theta > 0 && tau > 0 && n_scales > 0 && zoom > 0 && n_warps > 0 &&
        n_iters > 0)) {
    throw InvalidArgument("TV-L1 parameters must be positive");
  }
  if (!(zoom < 1.0)) throw InvalidArgument("TV-L1 zoom must be < 1");
  if (!(stop_eps >= 0.0)) throw InvalidArgument("TV-L1 stop_eps must be >= 0");
}

int effective_scales(int width, int height, const TvL1Params& p) {
  const int side = std::min(width, height);
  int n = p.n_scales;
  while (n > 1 && side * std::pow(p.zoom, n - 1) < 2.0) --n;
  return n;
}

FlowField compute_flow(const Image& prev, const Image& next, const TvL1Params& p,
                       TvL1Diagnostics* diag) {
  p.validate();
  if (prev.channels() != 1 || next.channels() != 1) {
    throw InvalidArgument("compute_flow expects single-channel images");
  }
  if (prev.width() != next.width() || prev.height() != next.height()) {
    throw InvalidArgument("compute_flow: image dimensions differ");
  }
  const int scales = effective_scales(prev.width(), prev.height(), p);
  if (scales < p.n_scales) {
    log::warn("TV-L1: image " + std::to_string(prev.width()) + "x" +
              std::to_string(prev.height()) + " too small for " + std::to_string(p.n_scales) +
              " scales, using " + std::to_string(scales));
  }

  std::vector<Plane> pyr0;
  std::vector<Plane> pyr1;
  pyr0.push_back(blur(from_image(prev, 255.f), kPresmoothSigma));
  pyr1.push_back(blur(from_image(next, 255.f), kPresmoothSigma));
  const double pyr_sigma = 0.6 * std::sqrt(1.0 / (p.zoom * p.zoom) - 1.0);
  for (int s = 1; s < scales; ++s) {
    const int w = std::max(1, static_cast<int>(pyr0.back().w * p.zoom + 0.5));
    const int h = std::max(1, static_cast<int>(pyr0.back().h * p.zoom + 0.5));
    pyr0.push_back(resample(blur(pyr0.back(), pyr_sigma), w, h));
    pyr1.push_back(resample(blur(pyr1.back(), pyr_sigma), w, h));
  }

  if (diag) {
    diag->scales_used = scales;
    diag->finest_energy.clear();
  }

  Plane u1(pyr0.back().w, pyr0.back().h);
  Plane u2(pyr0.back().w, pyr0.back().h);
  for (int s = scales - 1; s >= 0; --s) {
    const bool finest = s == 0;
    solve_level(pyr0[s], pyr1[s], u1, u2, p,
                (finest && diag) ? &diag->finest_energy : nullptr);
    if (!finest) {
      const Plane& target = pyr0[s - 1];
      const float sx = static_cast<float>(target.w) / static_cast<float>(u1.w);
      const float sy = static_cast<float>(target.h) / static_cast<float>(u1.h);
      u1 = resample(u1, target.w, target.h);
      u2 = resample(u2, target.w, target.h);
      for (auto& v : u1.v) v *= sx;
      for (auto& v : u2.v) v *= sy;
    }
  }
  return FlowField(u1.w, u1.h, std::move(u1.v), std::move(u2.v));
}

}  // namespace motad::flow

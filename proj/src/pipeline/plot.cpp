#include "motad/pipeline/plot.hpp"

#include <algorithm>
#include <cmath>

#include "motad/errors.hpp"
#include "motad/imaging/io.hpp"

namespace motad::pipeline {

namespace {

constexpr Rgb8 kBlack{0, 0, 0};
constexpr Rgb8 kBlue{40, 90, 220};
constexpr Rgb8 kRed{210, 40, 40};
constexpr Rgb8 kGrid{200, 200, 200};

// Curve through the points from (sx, sy). With `rectangles` each point's y
// spans the x-interval that ends at it, as average precision integrates.
void steps(Canvas& c, const std::vector<scoring::CurvePoint>& pts, double sx, double sy, Rgb8 color, bool rectangles) {
  double px = sx, py = sy;
  for (const auto& p : pts) {
    if (rectangles) {
      c.line(px, py, px, p.y, color);
      c.line(px, p.y, p.x, p.y, color);
    } else {
      c.line(px, py, p.x, p.y, color);
    }
    px = p.x;
    py = p.y;
  }
}

}  // namespace

Canvas::Canvas(int width, int height, int margin) : w_(width), h_(height), m_(margin) {
  if (width <= 2 * margin + 1 || height <= 2 * margin + 1) throw InvalidArgument("canvas too small for its margin");
  rgb_.assign(static_cast<std::size_t>(w_) * h_ * 3, 255);
}

void Canvas::set_range(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0) || !(y1 > y0)) throw InvalidArgument("empty plot range");
  x0_ = x0;
  x1_ = x1;
  y0_ = y0;
  y1_ = y1;
}

double Canvas::px(double x) const { return m_ + (x - x0_) / (x1_ - x0_) * (w_ - 1 - 2 * m_); }
double Canvas::py(double y) const { return h_ - 1 - m_ - (y - y0_) / (y1_ - y0_) * (h_ - 1 - 2 * m_); }

void Canvas::put(int x, int y, Rgb8 c) {
  if (x < m_ || y < m_ || x > w_ - 1 - m_ || y > h_ - 1 - m_) return;
  auto* p = &rgb_[(static_cast<std::size_t>(y) * w_ + x) * 3];
  p[0] = c[0];
  p[1] = c[1];
  p[2] = c[2];
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb8 color, bool dashed) {
  const double ax = px(x0), ay = py(y0), bx = px(x1), by = py(y1);
  const int n = static_cast<int>(std::ceil(std::max(std::fabs(bx - ax), std::fabs(by - ay)))) + 1;
  for (int i = 0; i <= n; ++i) {
    if (dashed && (i / 4) % 2 == 1) continue;
    const double s = static_cast<double>(i) / n;
    put(static_cast<int>(std::lround(ax + s * (bx - ax))), static_cast<int>(std::lround(ay + s * (by - ay))), color);
  }
}

void Canvas::polyline(const std::vector<double>& x, const std::vector<double>& y, Rgb8 color) {
  if (x.size() != y.size()) throw InvalidArgument("polyline coordinates differ in length");
  for (std::size_t i = 1; i < x.size(); ++i) line(x[i - 1], y[i - 1], x[i], y[i], color);
}

void Canvas::shade_columns(double x0, double x1, Rgb8 color) {
  const int a = static_cast<int>(std::floor(px(x0))), b = static_cast<int>(std::ceil(px(x1)));
  for (int y = m_; y <= h_ - 1 - m_; ++y) {
    for (int x = a; x <= b; ++x) put(x, y, color);
  }
}

void Canvas::frame(Rgb8 color) {
  for (int x = m_; x <= w_ - 1 - m_; ++x) {
    put(x, m_, color);
    put(x, h_ - 1 - m_, color);
  }
  for (int y = m_; y <= h_ - 1 - m_; ++y) {
    put(m_, y, color);
    put(w_ - 1 - m_, y, color);
  }
}

Rgb8 Canvas::at(int x, int y) const {
  const auto* p = &rgb_[(static_cast<std::size_t>(y) * w_ + x) * 3];
  return {p[0], p[1], p[2]};
}

void Canvas::save(const std::filesystem::path& path) const { write_png_rgb8(rgb_, w_, h_, path); }

void plot_curves(const scoring::CurveSummary& roc_fused, const scoring::CurveSummary& pr_fused,
                 const scoring::CurveSummary& roc_of, const scoring::CurveSummary& pr_of,
                 const std::filesystem::path& path) {
  constexpr int kPanel = 320;
  Canvas roc(kPanel, kPanel), pr(kPanel, kPanel);
  roc.line(0, 0, 1, 1, kGrid, true);
  steps(roc, roc_of.points, 0, 0, kBlue, false);
  steps(roc, roc_fused.points, 0, 0, kBlack, false);
  const double pr_start_of = pr_of.points.empty() ? 1.0 : pr_of.points.front().y;
  const double pr_start = pr_fused.points.empty() ? 1.0 : pr_fused.points.front().y;
  steps(pr, pr_of.points, 0, pr_start_of, kBlue, true);
  steps(pr, pr_fused.points, 0, pr_start, kBlack, true);
  roc.frame(kBlack);
  pr.frame(kBlack);

  std::vector<std::uint8_t> out(static_cast<std::size_t>(2 * kPanel) * kPanel * 3);
  for (int y = 0; y < kPanel; ++y) {
    for (int x = 0; x < kPanel; ++x) {
      for (int c = 0; c < 3; ++c) {
        out[(static_cast<std::size_t>(y) * 2 * kPanel + x) * 3 + c] = roc.at(x, y)[c];
        out[(static_cast<std::size_t>(y) * 2 * kPanel + kPanel + x) * 3 + c] = pr.at(x, y)[c];
      }
    }
  }
  write_png_rgb8(out, 2 * kPanel, kPanel, path);
}

void plot_trace(const scoring::AnomalyTrace& trace, int first_scored, std::optional<double> alarm_level,
                const std::filesystem::path& path) {
  if (trace.rows.empty()) throw InvalidArgument("cannot plot an empty trace");
  Canvas c(640, 240);
  const double x0 = trace.rows.front().frame, x1 = std::max(x0 + 1.0, static_cast<double>(trace.rows.back().frame));
  double top = 1.0;
  for (const auto& r : trace.rows) top = std::max({top, r.score, r.e_o});
  if (alarm_level) top = std::max(top, *alarm_level);
  c.set_range(x0 - 0.5, x1 + 0.5, 0.0, top * 1.05);
  for (const auto& r : trace.rows) {
    if (r.label) c.shade_columns(r.frame - 0.5, r.frame + 0.5, {250, 215, 215});
    else if (r.frame < first_scored) c.shade_columns(r.frame - 0.5, r.frame + 0.5, {230, 230, 230});
  }
  std::vector<double> x, score, eo;
  for (const auto& r : trace.rows) {
    x.push_back(r.frame);
    score.push_back(r.score);
    eo.push_back(r.e_o);
  }
  c.polyline(x, eo, kBlue);
  c.polyline(x, score, kBlack);
  if (alarm_level) c.line(x0 - 0.5, *alarm_level, x1 + 0.5, *alarm_level, kRed, true);
  c.frame(kBlack);
  c.save(path);
}

}  // namespace motad::pipeline

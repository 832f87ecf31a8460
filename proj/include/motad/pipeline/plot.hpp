#pragma once
// Minimal raster charts written as PNG. No text rendering: axes span [0, 1]
// for the curve panels and the full trace for score plots.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "motad/scoring/metrics.hpp"

namespace motad::pipeline {

using Rgb8 = std::array<std::uint8_t, 3>;

/// RGB canvas with a data rectangle mapped to an inner plot area.
class Canvas {
 public:
  Canvas(int width, int height, int margin = 12);

  void set_range(double x0, double x1, double y0, double y1);
  /// Data-space polyline, clipped to the plot area.
  void line(double x0, double y0, double x1, double y1, Rgb8 color, bool dashed = false);
  void polyline(const std::vector<double>& x, const std::vector<double>& y, Rgb8 color);
  /// Fills the data-space band [x0, x1] over the full height.
  void shade_columns(double x0, double x1, Rgb8 color);
  void frame(Rgb8 color);

  const std::vector<std::uint8_t>& pixels() const { return rgb_; }
  int width() const { return w_; }
  int height() const { return h_; }
  /// Pixel at integer canvas coordinates (tests).
  Rgb8 at(int x, int y) const;
  void save(const std::filesystem::path& path) const;

 private:
  void put(int x, int y, Rgb8 c);
  double px(double x) const;
  double py(double y) const;

  int w_, h_, m_;
  double x0_ = 0.0, x1_ = 1.0, y0_ = 0.0, y1_ = 1.0;
  std::vector<std::uint8_t> rgb_;
};

/// ROC (left) and PR (right) step curves, fused in black and OF-only in blue.
void plot_curves(const scoring::CurveSummary& roc_fused, const scoring::CurveSummary& pr_fused,
                 const scoring::CurveSummary& roc_of, const scoring::CurveSummary& pr_of,
                 const std::filesystem::path& path);

/// Fused score (black) and e_o (blue) over frames; anomalous frames shaded
/// red, warm-up frames grey, optional alarm level as a dashed red line.
void plot_trace(const scoring::AnomalyTrace& trace, int first_scored, std::optional<double> alarm_level,
                const std::filesystem::path& path);

}  // namespace motad::pipeline

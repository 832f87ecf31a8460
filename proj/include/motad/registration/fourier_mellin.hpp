#pragma once
// Frequency-domain similarity registration: phase correlation for
// translation, log-polar magnitude spectra for rotation and scale.

#include <vector>

#include "motad/imaging/types.hpp"

namespace motad::registration {

struct PhaseCorrelation {
  double tx = 0.0;
  double ty = 0.0;
  double peak_response = 0.0;  // height of the normalized correlation peak, in [0, 1]
};

/// Translation t such that b(x) ~ a(x - t), using the plane overload below
/// with its default peak width. Constant inputs give zero shift with
/// peak_response 0.
PhaseCorrelation phase_correlate(const Image& a, const Image& b);

/// Phase correlation of raw row-major planes, no windowing, so cyclic shifts
/// are recovered exactly. The whitened cross-power spectrum is weighted by a
/// Gaussian that gives the correlation peak a spatial standard deviation of
/// peak_sigma pixels (0 keeps it sharp); the sub-pixel offset is the vertex of
/// a parabola through the log of the peak and its two neighbours along each
/// axis. peak_response is normalized so identical inputs give 1.
PhaseCorrelation phase_correlate(const std::vector<double>& a, const std::vector<double>& b,
                                 int width, int height, double peak_sigma = 1.0);

struct RegistrationResult {
  SimilarityTransform transform;  // maps a's pixel coordinates onto b's
  double peak_response = 0.0;
  bool low_confidence = false;    // masked fraction exceeded the limit
};

struct RegistrationOptions {
  int log_polar_angles = 0;  // 0 = 2 * max(width, height)
  int log_polar_radii = 0;   // 0 = 2 * max(width, height)
  double max_masked_fraction = 0.9;
  int refine_iterations = 2;  // translation re-estimates with the current estimate undone
};

/// Full Fourier-Mellin registration of single-channel images. Pixels selected
/// by body_mask (may be null) are replaced by the mean of the unselected ones
/// in both images before windowing.
RegistrationResult register_similarity(const Image& a, const Image& b,
                                       const Mask* body_mask = nullptr,
                                       const RegistrationOptions& opts = {});

}  // namespace motad::registration

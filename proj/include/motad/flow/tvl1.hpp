#pragma once
// Duality-based TV-L1 optical flow (coarse-to-fine, warping, primal-dual
// inner iterations with a thresholding step on the linearized data term).

#include <vector>

#include "motad/imaging/types.hpp"

namespace motad::flow {

/// Solver parameters. lambda is expressed for intensities in [0, 255]; input
/// images in [0, 1] are rescaled internally so the usual published defaults
/// apply unchanged.
struct TvL1Params {
  double lambda = 0.15;
  double theta = 0.3;
  double tau = 0.25;
  int n_scales = 5;
  double zoom = 0.5;
  int n_warps = 5;
  int n_iters = 25;
  double stop_eps = 0.01;
  bool median_filter = true;  // 3x3 median of the flow after every warp

  /// Throws InvalidArgument on non-positive values or zoom >= 1.
  void validate() const;
};

/// Optional introspection filled by compute_flow.
struct TvL1Diagnostics {
  int scales_used = 0;
  // Relaxed energy TV(u) + |u - v|^2 / (2 theta) + lambda |rho(v)| after each
  // inner iteration at the finest level, one vector per warp (rho linearized
  // around that warp). Non-increasing within a warp.
  std::vector<std::vector<double>> finest_energy;
};

/// Largest usable pyramid depth for a width x height image.
int effective_scales(int width, int height, const TvL1Params& p);

/// Flow mapping prev to next: prev(x) ~ next(x + flow(x)). Single-channel
/// inputs of equal size. Deterministic for fixed inputs and params.
FlowField compute_flow(const Image& prev, const Image& next, const TvL1Params& p = {},
                       TvL1Diagnostics* diag = nullptr);

}  // namespace motad::flow

#pragma once

#include <utility>

#include "motad/imaging/types.hpp"

namespace motad {

/// Luma conversion (0.299 R + 0.587 G + 0.114 B); gray input is returned as is.
Image to_gray(const Image& img);

/// Bilinear resample to an arbitrary size with pixel-centre alignment.
Image resize_bilinear(const Image& img, int width, int height);

/// Shorter edge resized to `side` (long edge rounded half-up, aspect kept),
/// then a symmetric centre crop to side x side.
Image resize_center_crop(const Image& img, int side);

/// Same geometry as the image overload; displacements are multiplied by the
/// resize factor so they stay in output-pixel units.
FlowField resize_center_crop(const FlowField& flow, int side);

/// Channel-wise median of the selected pixels. Even counts take the lower
/// median. Throws EmptySelection when the mask selects nothing.
std::pair<float, float> masked_median(const FlowField& flow, const Mask& mask);

/// Bilinear inverse warp: out(x) = img(tf^-1(x)). Samples outside the source
/// take the nearest edge value.
Image warp_by_similarity(const Image& img, const SimilarityTransform& tf);

/// Bilinear sample of a single-channel plane with edge clamping.
float sample_bilinear(const float* plane, int width, int height, double x, double y);

/// Separable Gaussian blur of a single-channel image (edge clamped).
Image gaussian_blur(const Image& img, double sigma);

/// Per-pixel displacement magnitude.
std::vector<float> flow_magnitude(const FlowField& flow);

/// Flow with every selected pixel set to zero.
FlowField zero_inside(const FlowField& flow, const Mask& mask);

}  // namespace motad

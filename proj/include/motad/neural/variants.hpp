#pragma once
// Optical-flow input variants fed to the network.

#include <optional>
#include <string_view>

#include "motad/imaging/types.hpp"

namespace motad::nn {

enum class Variant { raw, registered, masked, masked_registered };

std::string_view to_string(Variant v);
/// Throws InvalidArgument for unknown names.
Variant variant_from_string(std::string_view name);

bool uses_registration(Variant v);
bool uses_mask(Variant v);

/// Selects and masks one flow. `raw` is the flow of the unaligned pair and
/// `registered` the flow computed after warping the second frame by the
/// observed transform (cached upstream). Masked variants zero the flow where
/// body_mask is set. Throws InvalidArgument when the variant needs a mask or a
/// registered flow that is not given.
FlowField preprocess_variant(const FlowField& raw, Variant v, const Mask* body_mask,
                             const FlowField* registered);

/// Second frame brought into the first frame's coordinates: out(x) =
/// next(tf(x)) for a transform with next(tf(x)) ~ prev(x).
Image align_to_previous(const Image& next, const SimilarityTransform& tf);

}  // namespace motad::nn

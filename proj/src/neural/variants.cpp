#include "motad/neural/variants.hpp"

#include <string>

#include "motad/errors.hpp"
#include "motad/imaging/ops.hpp"

namespace motad::nn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::raw: return "raw";
    case Variant::registered: return "registered";
    case Variant::masked: return "masked";
    case Variant::masked_registered: return "masked_registered";
  }
  return "raw";
}

Variant variant_from_string(std::string_view name) {
  for (auto v : {Variant::raw, Variant::registered, Variant::masked, Variant::masked_registered}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument("unknown flow variant '" + std::string(name) + "'");
}

bool uses_registration(Variant v) { return v == Variant::registered || v == Variant::masked_registered; }
bool uses_mask(Variant v) { return v == Variant::masked || v == Variant::masked_registered; }

FlowField preprocess_variant(const FlowField& raw, Variant v, const Mask* body_mask, const FlowField* registered) {
  if (uses_mask(v) && body_mask == nullptr) {
    throw InvalidArgument(std::string(to_string(v)) + " variant needs a body mask");
  }
  if (uses_registration(v) && registered == nullptr) {
    throw InvalidArgument(std::string(to_string(v)) + " variant needs the registered flow");
  }
  const FlowField& base = uses_registration(v) ? *registered : raw;
  return uses_mask(v) ? zero_inside(base, *body_mask) : base;
}

Image align_to_previous(const Image& next, const SimilarityTransform& tf) {
  return warp_by_similarity(next, tf.inverse());
}

}  // namespace motad::nn

#pragma once
// Probabilistic U-Net: a U-Net maps the past flow to a feature map, a latent
// sample is tiled over it, and 1x1 convolutions decode the current flow. The
// latent comes from the posterior (past and current flow) during training and
// from the prior (past flow only) at test time.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "motad/imaging/types.hpp"
#include "motad/neural/tensor.hpp"

namespace motad::nn {

struct ProbUNetConfig {
  int side = 32;        // input height and width
  int depth = 3;        // resolution levels; side must be divisible by 2^(depth-1)
  int base = 8;         // channels at full resolution, doubled per level
  int latent = 6;       // D
  double beta = 10.0;   // KL weight
  int in_channels = 2;  // flow components

  static ProbUNetConfig desk() { return {}; }
  /// 64x64 inputs with a wider, deeper network (a few million parameters).
  static ProbUNetConfig full_scale() { return {64, 4, 32, 6, 10.0, 2}; }

  /// Throws InvalidArgument.
  void validate() const;
  friend bool operator==(const ProbUNetConfig&, const ProbUNetConfig&) = default;
};

/// Diagonal Gaussian, [N, D] each; sigma = exp(log_sigma) > 0.
struct LatentGaussian {
  Tensor mu;
  Tensor log_sigma;
};

/// KL(q || p) summed over D (averaged over N rows).
Tensor kl_diag_gaussians(const LatentGaussian& q, const LatentGaussian& p);

struct NamedParameter {
  std::string name;
  Tensor tensor;  // shares storage with the model
};

struct TrainStep {
  Tensor prediction;  // [N, 2, H, W]
  Tensor loss;        // mse + beta * kl
  Tensor mse;
  Tensor kl;
};

class ProbUNet {
 public:
  /// He-initialized from seed.
  explicit ProbUNet(const ProbUNetConfig& cfg, std::uint64_t seed = 0);

  const ProbUNetConfig& config() const { return cfg_; }

  /// Magnitude that maps flows (in pixels) to network units; 1 until set.
  double flow_scale() const { return flow_scale_; }
  void set_flow_scale(double s);

  /// Every trainable tensor in declared order (checkpoint order).
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;

  /// Last U-Net activation map, [N, base, H, W].
  Tensor features(const Tensor& past) const;
  LatentGaussian prior(const Tensor& past) const;
  LatentGaussian posterior(const Tensor& past, const Tensor& now) const;
  /// Fuser over features with z [N, D] tiled spatially; [N, 2, H, W].
  Tensor decode(const Tensor& features, const Tensor& z) const;

  /// z = mu_post + sigma_post * noise, loss = MSE(prediction, now) + beta * KL.
  /// Inputs are normalized [N, 2, H, W]; noise is [N, D].
  TrainStep forward_train(const Tensor& past, const Tensor& now, const Tensor& noise) const;
  TrainStep forward_train(const Tensor& past, const Tensor& now, const Tensor& noise, double beta) const;

  /// Writes the "PUN1" container: magic, version, architecture, flow scale,
  /// then every parameter as little-endian float32 in declared order.
  void save(const std::filesystem::path& path) const;
  /// Throws FormatError on a malformed or truncated file.
  static ProbUNet load(const std::filesystem::path& path);

 private:
  struct Conv {
    Tensor w, b;
  };
  struct Linear {
    Tensor w, b;
  };
  struct Encoder {
    std::vector<Conv> convs;  // two per level
    Linear head;              // -> 2D
  };

  Encoder make_encoder(int in_channels, std::mt19937_64& rng) const;
  LatentGaussian encode(const Encoder& e, const Tensor& x) const;

  ProbUNetConfig cfg_;
  double flow_scale_ = 1.0;
  std::vector<Conv> down_;   // two per level
  std::vector<Conv> up_;     // two per decoder level
  Encoder prior_;
  Encoder posterior_;
  std::vector<Conv> fuser_;  // three 1x1 convolutions
};

/// Stacks flows divided by scale into [N, 2, H, W].
Tensor flows_to_tensor(const std::vector<const FlowField*>& flows, double scale);
/// Sample i of a [N, 2, H, W] tensor, multiplied by scale.
FlowField tensor_to_flow(const Tensor& t, int index, double scale);

}  // namespace motad::nn

#pragma once
// Training the probabilistic U-Net on nominal flow sequences and turning it
// into the learned error e_o.
//
// Frame convention: flows[i] is the flow from frame i to frame i+1, so the
// flow "at" frame t is flows[t-1] and the past flow n frames earlier is
// flows[t-1-n]. Frame t is predictable once t > A + B.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "motad/imaging/types.hpp"
#include "motad/neural/prob_unet.hpp"

namespace motad::nn {

struct RangeConfig {
  int A = 5;  // smallest offset, frames
  int B = 4;  // offsets A..A+B are used (B+1 of them)
  int M = 10; // prior samples per offset

  /// A >= 1, B >= 0, M >= 1. Throws InvalidArgument.
  void validate() const;
  int first_scored_frame() const { return A + B + 1; }
};

struct TrainOptions {
  int epochs = 10;
  int batch = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  // Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Called after each epoch with (epoch index from 0, epoch-mean loss).
  std::function<void(int, double)> on_epoch;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // sample-weighted mean of the batch losses
  std::size_t samples_per_epoch = 0;
  std::size_t skipped_sequences = 0;
};

/// 99th percentile of per-pixel flow magnitude over every flow; 1 when that
/// percentile is zero.
double flow_scale_p99(const std::vector<std::vector<FlowField>>& sequences);

/// Trains in place. Every frame t > A + B of every sequence is one sample per
/// epoch; its offset n is redrawn uniformly from [A, A+B] each epoch. Inputs
/// are divided by model.flow_scale(), which is set from the data when still 1.
/// Sequences with at most A + B flows are skipped with a warning; throws
/// InvalidArgument if nothing is left and TrainingDiverged on a non-finite
/// loss.
TrainResult train(ProbUNet& model, const std::vector<std::vector<FlowField>>& sequences, const RangeConfig& rc,
                  const TrainOptions& opts);

/// Smallest candidate error; throws InvalidArgument when empty.
double min_candidate_error(std::span<const double> candidate_mse);

/// Scores frames of one flow sequence. U-Net features and prior parameters
/// are cached per past flow, so scoring every frame costs one encoder pass
/// per flow plus the fuser passes.
class ErrorPredictor {
 public:
  ErrorPredictor(const ProbUNet& model, const std::vector<FlowField>& flows);

  /// min over n in [A, A+B], j in [1, M] of MSE(O_t, decode(past_n, z_nj))
  /// with z_nj drawn from the prior. The noise for (seed, t, n, j) is fixed,
  /// so candidate sets for nested ranges are nested. Requires
  /// A + B < t <= flows.size().
  double operator()(int t, const RangeConfig& rc, std::uint64_t seed);

  /// All (B+1) * M candidate errors, offset-major.
  std::vector<double> candidates(int t, const RangeConfig& rc, std::uint64_t seed);

 private:
  struct Cached {
    Tensor features;  // [1, base, H, W]
    Tensor mu, log_sigma;
  };
  const Cached& cached(int flow_index);

  const ProbUNet& model_;
  const std::vector<FlowField>& flows_;
  std::vector<Cached> cache_;
};

/// One-shot form of ErrorPredictor.
double predict_error(const ProbUNet& model, const std::vector<FlowField>& flows, int t, const RangeConfig& rc,
                     std::uint64_t seed);

/// Standard-normal noise for prior sample (seed, t, n, j), length D.
std::vector<double> prior_noise(std::uint64_t seed, int t, int n, int j, int latent);

}  // namespace motad::nn

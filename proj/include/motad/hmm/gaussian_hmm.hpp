#pragma once
// Hidden Markov model with diagonal-Gaussian emissions, fit by Baum-Welch on
// nominal feature sequences and used as a frame-level likelihood baseline.

#include <array>
#include <cstdint>
#include <vector>

namespace motad::hmm {

/// Per-frame motion summary in pixels; all entries finite and >= 0.
struct FeatureVector {
  double max_flow_mag = 0.0;
  double body_motion_mag = 0.0;
  double camera_motion_mag = 0.0;

  std::vector<double> values() const { return {max_flow_mag, body_motion_mag, camera_motion_mag}; }
};

using Observation = std::vector<double>;
using Sequence = std::vector<Observation>;

Sequence to_sequence(const std::vector<FeatureVector>& features);

struct GaussianHmm {
  std::vector<double> pi;                  // initial distribution
  std::vector<std::vector<double>> trans;  // row-stochastic
  std::vector<std::vector<double>> mean;   // [state][dim]
  std::vector<std::vector<double>> var;    // [state][dim], >= floor

  int n_states() const { return static_cast<int>(pi.size()); }
  int dim() const { return mean.empty() ? 0 : static_cast<int>(mean[0].size()); }
  /// Consistent sizes, stochastic pi and rows within 1e-9, positive
  /// variances. Throws InvalidArgument.
  void validate() const;

  /// log p(o | state), all states.
  std::vector<double> log_emission(const Observation& o) const;
};

struct FitOptions {
  int n_states = 5;
  int max_iters = 100;
  double tol = 1e-6;        // stop when total log-likelihood improves by less
  double var_floor = 1e-6;
  std::uint64_t seed = 0;   // k-means seeding and starvation restarts
};

struct FitResult {
  GaussianHmm model;
  /// Total log-likelihood of the training data under the parameters entering
  /// each iteration; last entry is for the returned model.
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  int reinitialized_states = 0;
};

/// Baum-Welch with scaled forward-backward. Every sequence needs >= 2 frames.
/// A state whose total responsibility drops below 1e-12 is restarted at a
/// random training frame (with a warning). With `init` the iterations start
/// from that model instead of the k-means seeding; its state count wins.
FitResult fit(const std::vector<Sequence>& sequences, const FitOptions& opts, const GaussianHmm* init = nullptr);

/// Lifts initial and transition probabilities below `floor` up to it, then
/// renormalizes. Baum-Welch drives unseen transitions to exactly zero, which
/// gives frames outside the training paths a likelihood of zero.
GaussianHmm with_probability_floor(GaussianHmm model, double floor);

/// log p(o_1..o_t) for t = 1..T by one scaled forward pass.
std::vector<double> prefix_log_likelihoods(const GaussianHmm& model, const Sequence& seq);

/// log p(o_1..o_t); requires 1 <= t <= seq.size().
double prefix_log_likelihood(const GaussianHmm& model, const Sequence& seq, int t);

/// -(1/t) log p(o_1..o_t) for every t; larger means less likely.
std::vector<double> anomaly_scores(const GaussianHmm& model, const Sequence& seq);

}  // namespace motad::hmm

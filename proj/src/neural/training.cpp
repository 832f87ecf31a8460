#include "motad/neural/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "motad/errors.hpp"
#include "motad/imaging/ops.hpp"
#include "motad/log.hpp"

namespace motad::nn {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Adam {
  explicit Adam(const std::vector<NamedParameter>& params, const TrainOptions& o) : opts(o) {
    for (const auto& p : params) {
      m.emplace_back(p.tensor.numel(), 0.0);
      v.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  void step(std::vector<NamedParameter>& params) {
    ++t;
    const double c1 = 1.0 - std::pow(opts.beta1, t);
    const double c2 = 1.0 - std::pow(opts.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto x = params[k].tensor.data();
      auto g = params[k].tensor.grad();
      if (g.empty()) continue;
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[k][i] = opts.beta1 * m[k][i] + (1.0 - opts.beta1) * g[i];
        v[k][i] = opts.beta2 * v[k][i] + (1.0 - opts.beta2) * g[i] * g[i];
        x[i] -= opts.lr * (m[k][i] / c1) / (std::sqrt(v[k][i] / c2) + opts.epsilon);
      }
    }
  }

  const TrainOptions& opts;
  std::vector<std::vector<double>> m, v;
  int t = 0;
};

struct Sample {
  std::size_t sequence;
  int t;  // frame index; target flows[t-1]
};

// [rows, ...] tensor repeating rows of src (values only).
Tensor gather_rows(const Tensor& src, const std::vector<int>& rows) {
  Shape s = src.shape();
  const std::size_t per = src.numel() / static_cast<std::size_t>(s[0]);
  std::vector<double> v(rows.size() * per);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.data().data() + static_cast<std::size_t>(rows[i]) * per, per, v.data() + i * per);
  }
  s[0] = static_cast<int>(rows.size());
  return Tensor::from(std::move(s), std::move(v));
}

}  // namespace

void RangeConfig::validate() const {
  if (A < 1) throw InvalidArgument("A must be >= 1");
  if (B < 0) throw InvalidArgument("B must be >= 0");
  if (M < 1) throw InvalidArgument("M must be >= 1");
}

double flow_scale_p99(const std::vector<std::vector<FlowField>>& sequences) {
  std::vector<float> mags;
  for (const auto& seq : sequences) {
    for (const auto& f : seq) {
      const auto m = flow_magnitude(f);
      mags.insert(mags.end(), m.begin(), m.end());
    }
  }
  if (mags.empty()) throw InvalidArgument("no flows to normalize");
  const std::size_t k = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(mags.size() - 1)));
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
  const double p = mags[k];
  return p > 0.0 ? p : 1.0;
}

TrainResult train(ProbUNet& model, const std::vector<std::vector<FlowField>>& sequences, const RangeConfig& rc,
                  const TrainOptions& opts) {
  rc.validate();
  if (opts.epochs < 1 || opts.batch < 1 || !(opts.lr > 0.0)) {
    throw InvalidArgument("epochs, batch and learning rate must be positive");
  }
  TrainResult res;
  std::vector<Sample> samples;
  std::vector<std::vector<FlowField>> usable;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const int n_flows = static_cast<int>(sequences[s].size());
    if (n_flows <= rc.A + rc.B) {
      log::warn("training sequence " + std::to_string(s) + " has " + std::to_string(n_flows) +
                " flows, needs more than A+B = " + std::to_string(rc.A + rc.B) + "; skipped");
      ++res.skipped_sequences;
      continue;
    }
    for (int t = rc.first_scored_frame(); t <= n_flows; ++t) samples.push_back({s, t});
  }
  if (samples.empty()) throw InvalidArgument("no usable training sequences");
  if (model.flow_scale() == 1.0) model.set_flow_scale(flow_scale_p99(sequences));
  res.samples_per_epoch = samples.size();

  auto params = model.parameters();
  Adam adam(params, opts);
  const double scale = model.flow_scale();
  const int latent = model.config().latent;
  std::mt19937_64 rng(mix(opts.seed ^ 0x7a11u));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> offset(rc.A, rc.A + rc.B);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(samples.begin(), samples.end(), rng);
    std::vector<int> n(samples.size());
    for (int& x : n) x = offset(rng);
    double sum = 0.0;
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += static_cast<std::size_t>(opts.batch)) {
      const std::size_t b1 = std::min(samples.size(), b0 + static_cast<std::size_t>(opts.batch));
      std::vector<const FlowField*> past, now;
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& seq = sequences[samples[i].sequence];
        now.push_back(&seq[static_cast<std::size_t>(samples[i].t - 1)]);
        past.push_back(&seq[static_cast<std::size_t>(samples[i].t - 1 - n[i])]);
      }
      std::vector<double> eps(past.size() * static_cast<std::size_t>(latent));
      for (double& e : eps) e = gauss(rng);
      const TrainStep step = model.forward_train(
          flows_to_tensor(past, scale), flows_to_tensor(now, scale),
          Tensor::from({static_cast<int>(past.size()), latent}, std::move(eps)));
      const double loss = step.loss.item();
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at sample " +
                               std::to_string(b0) + " (mse " + std::to_string(step.mse.item()) + ", kl " +
                               std::to_string(step.kl.item()) + ")");
      }
      for (auto& p : params) p.tensor.zero_grad();
      step.loss.backward();
      adam.step(params);
      sum += loss * static_cast<double>(b1 - b0);
    }
    res.epoch_loss.push_back(sum / static_cast<double>(samples.size()));
    if (opts.on_epoch) opts.on_epoch(epoch, res.epoch_loss.back());
  }
  for (auto& p : params) p.tensor.zero_grad();
  return res;
}

double min_candidate_error(std::span<const double> candidate_mse) {
  if (candidate_mse.empty()) throw InvalidArgument("no candidate errors");
  return *std::min_element(candidate_mse.begin(), candidate_mse.end());
}

std::vector<double> prior_noise(std::uint64_t seed, int t, int n, int j, int latent) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(t));
  h = mix(h ^ static_cast<std::uint64_t>(n));
  h = mix(h ^ static_cast<std::uint64_t>(j));
  std::mt19937_64 rng(h);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(latent));
  for (double& x : v) x = g(rng);
  return v;
}

ErrorPredictor::ErrorPredictor(const ProbUNet& model, const std::vector<FlowField>& flows)
    : model_(model), flows_(flows), cache_(flows.size()) {}

const ErrorPredictor::Cached& ErrorPredictor::cached(int flow_index) {
  Cached& c = cache_[static_cast<std::size_t>(flow_index)];
  if (!c.features.defined()) {
    NoGradGuard ng;
    const Tensor x = flows_to_tensor({&flows_[static_cast<std::size_t>(flow_index)]}, model_.flow_scale());
    c.features = model_.features(x);
    const LatentGaussian p = model_.prior(x);
    c.mu = p.mu;
    c.log_sigma = p.log_sigma;
  }
  return c;
}

std::vector<double> ErrorPredictor::candidates(int t, const RangeConfig& rc, std::uint64_t seed) {
  rc.validate();
  if (t <= rc.A + rc.B || t > static_cast<int>(flows_.size())) {
    throw InvalidArgument("predict_error: frame " + std::to_string(t) + " outside (A+B, " +
                          std::to_string(flows_.size()) + "]");
  }
  NoGradGuard ng;
  const int latent = model_.config().latent;
  const int offsets = rc.B + 1;
  const int rows = offsets * rc.M;
  const Tensor first = cached(t - 1 - rc.A).features;
  const std::size_t per = first.numel();
  Shape fs = first.shape();
  fs[0] = rows;
  std::vector<double> feat(per * static_cast<std::size_t>(rows));
  std::vector<double> z(static_cast<std::size_t>(rows) * latent);
  for (int k = 0; k < offsets; ++k) {
    const int n = rc.A + k;
    const Cached& c = cached(t - 1 - n);
    for (int j = 1; j <= rc.M; ++j) {
      const int row = k * rc.M + (j - 1);
      std::copy_n(c.features.data().data(), per, feat.data() + static_cast<std::size_t>(row) * per);
      const auto eps = prior_noise(seed, t, n, j, latent);
      for (int d = 0; d < latent; ++d) {
        z[static_cast<std::size_t>(row) * latent + d] = c.mu.data()[d] + std::exp(c.log_sigma.data()[d]) * eps[d];
      }
    }
  }
  const Tensor pred = model_.decode(Tensor::from(fs, std::move(feat)), Tensor::from({rows, latent}, std::move(z)));
  const Tensor target = flows_to_tensor({&flows_[static_cast<std::size_t>(t - 1)]}, model_.flow_scale());
  const Tensor errs = mse_per_sample(pred, gather_rows(target, std::vector<int>(static_cast<std::size_t>(rows), 0)));
  return {errs.data().begin(), errs.data().end()};
}

double ErrorPredictor::operator()(int t, const RangeConfig& rc, std::uint64_t seed) {
  const auto c = candidates(t, rc, seed);
  return min_candidate_error(c);
}

double predict_error(const ProbUNet& model, const std::vector<FlowField>& flows, int t, const RangeConfig& rc,
                     std::uint64_t seed) {
  ErrorPredictor p(model, flows);
  return p(t, rc, seed);
}

}  // namespace motad::nn

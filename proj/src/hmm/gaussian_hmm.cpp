#include "motad/hmm/gaussian_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "motad/errors.hpp"
#include "motad/log.hpp"

namespace motad::hmm {

namespace {

constexpr double kStarved = 1e-12;
constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

struct Pooled {
  std::vector<double> mean, var;
  std::size_t count = 0;
};

Pooled pooled_moments(const std::vector<Sequence>& seqs, int dim, double floor) {
  Pooled p;
  p.mean.assign(dim, 0.0);
  p.var.assign(dim, 0.0);
  for (const auto& s : seqs) {
    for (const auto& o : s) {
      for (int d = 0; d < dim; ++d) p.mean[d] += o[d];
      ++p.count;
    }
  }
  for (double& m : p.mean) m /= static_cast<double>(p.count);
  for (const auto& s : seqs) {
    for (const auto& o : s) {
      for (int d = 0; d < dim; ++d) p.var[d] += (o[d] - p.mean[d]) * (o[d] - p.mean[d]);
    }
  }
  for (double& v : p.var) v = std::max(v / static_cast<double>(p.count), floor);
  return p;
}

double sq_dist(const Observation& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

// k-means++ seeding followed by Lloyd iterations on the pooled frames.
std::vector<std::vector<double>> kmeans_means(const std::vector<const Observation*>& frames, int k,
                                              std::mt19937_64& rng) {
  std::vector<std::vector<double>> c;
  c.push_back(*frames[std::uniform_int_distribution<std::size_t>(0, frames.size() - 1)(rng)]);
  std::vector<double> d2(frames.size());
  while (static_cast<int>(c.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      d2[i] = std::numeric_limits<double>::max();
      for (const auto& m : c) d2[i] = std::min(d2[i], sq_dist(*frames[i], m));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      while (pick + 1 < frames.size() && r >= d2[pick]) r -= d2[pick++];
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, frames.size() - 1)(rng);
    }
    c.push_back(*frames[pick]);
  }
  const std::size_t dim = c[0].size();
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> n(k, 0);
    for (const auto* f : frames) {
      int best = 0;
      for (int j = 1; j < k; ++j) {
        if (sq_dist(*f, c[j]) < sq_dist(*f, c[best])) best = j;
      }
      for (std::size_t d = 0; d < dim; ++d) sum[best][d] += (*f)[d];
      ++n[best];
    }
    for (int j = 0; j < k; ++j) {
      if (n[j] == 0) continue;  // empty cluster keeps its centre
      for (std::size_t d = 0; d < dim; ++d) c[j][d] = sum[j][d] / static_cast<double>(n[j]);
    }
  }
  return c;
}

struct ForwardPass {
  std::vector<std::vector<double>> alpha;  // normalized, alpha[t] sums to 1
  std::vector<double> log_scale;           // log c_t, including the emission offset
  std::vector<double> scale;               // c_t without the offset
  std::vector<std::vector<double>> emit;   // exp(log b - max_t)
};

ForwardPass forward(const GaussianHmm& m, const Sequence& seq) {
  const int n = m.n_states();
  ForwardPass f;
  f.alpha.assign(seq.size(), std::vector<double>(n));
  f.log_scale.assign(seq.size(), 0.0);
  f.scale.assign(seq.size(), 0.0);
  f.emit.assign(seq.size(), std::vector<double>(n));
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto lb = m.log_emission(seq[t]);
    const double top = *std::max_element(lb.begin(), lb.end());
    for (int j = 0; j < n; ++j) f.emit[t][j] = std::exp(lb[j] - top);
    double c = 0.0;
    for (int j = 0; j < n; ++j) {
      double a = 0.0;
      if (t == 0) {
        a = m.pi[j];
      } else {
        for (int i = 0; i < n; ++i) a += f.alpha[t - 1][i] * m.trans[i][j];
      }
      f.alpha[t][j] = a * f.emit[t][j];
      c += f.alpha[t][j];
    }
    f.scale[t] = c;
    if (!(c > 0.0)) {
      f.log_scale[t] = -std::numeric_limits<double>::infinity();
      std::fill(f.alpha[t].begin(), f.alpha[t].end(), 1.0 / n);
      continue;
    }
    for (double& a : f.alpha[t]) a /= c;
    f.log_scale[t] = std::log(c) + top;
  }
  return f;
}

void check_sequence(const GaussianHmm& m, const Sequence& seq) {
  for (const auto& o : seq) {
    if (static_cast<int>(o.size()) != m.dim()) throw InvalidArgument("observation dimension mismatch");
    for (double v : o) {
      if (!std::isfinite(v)) throw InvalidArgument("observation is not finite");
    }
  }
}

}  // namespace

Sequence to_sequence(const std::vector<FeatureVector>& features) {
  Sequence s;
  s.reserve(features.size());
  for (const auto& f : features) s.push_back(f.values());
  return s;
}

void GaussianHmm::validate() const {
  const int n = n_states();
  if (n < 1) throw InvalidArgument("HMM needs at least one state");
  if (static_cast<int>(trans.size()) != n || static_cast<int>(mean.size()) != n ||
      static_cast<int>(var.size()) != n) {
    throw InvalidArgument("HMM parameter sizes disagree");
  }
  double s = 0.0;
  for (double p : pi) s += p;
  if (std::fabs(s - 1.0) > 1e-9) throw InvalidArgument("pi does not sum to 1");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(trans[i].size()) != n) throw InvalidArgument("transition matrix is not square");
    double r = 0.0;
    for (double p : trans[i]) {
      if (p < 0.0) throw InvalidArgument("negative transition probability");
      r += p;
    }
    if (std::fabs(r - 1.0) > 1e-9) throw InvalidArgument("transition row does not sum to 1");
    if (static_cast<int>(mean[i].size()) != dim() || static_cast<int>(var[i].size()) != dim()) {
      throw InvalidArgument("emission dimension mismatch");
    }
    for (double v : var[i]) {
      if (!(v > 0.0)) throw InvalidArgument("emission variance must be positive");
    }
  }
}

std::vector<double> GaussianHmm::log_emission(const Observation& o) const {
  std::vector<double> out(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    double lp = 0.0;
    for (std::size_t d = 0; d < o.size(); ++d) {
      const double diff = o[d] - mean[j][d];
      lp -= 0.5 * (kLog2Pi + std::log(var[j][d]) + diff * diff / var[j][d]);
    }
    out[j] = lp;
  }
  return out;
}

FitResult fit(const std::vector<Sequence>& sequences, const FitOptions& opts, const GaussianHmm* init) {
  if (sequences.empty()) throw InvalidArgument("fit needs at least one sequence");
  if (opts.n_states < 1 || opts.max_iters < 1 || !(opts.var_floor > 0.0) || !(opts.tol >= 0.0)) {
    throw InvalidArgument("bad HMM fit options");
  }
  const int dim = sequences[0].empty() ? 0 : static_cast<int>(sequences[0][0].size());
  if (dim < 1) throw InvalidArgument("observations must be non-empty vectors");
  std::vector<const Observation*> frames;
  for (const auto& s : sequences) {
    if (s.size() < 2) throw InvalidArgument("every training sequence needs at least 2 frames");
    for (const auto& o : s) {
      if (static_cast<int>(o.size()) != dim) throw InvalidArgument("observation dimension mismatch");
      for (double v : o) {
        if (!std::isfinite(v)) throw InvalidArgument("observation is not finite");
      }
      frames.push_back(&o);
    }
  }
  if (init != nullptr) {
    init->validate();
    if (init->dim() != dim) throw InvalidArgument("initial model dimension mismatch");
  }
  const int n = init != nullptr ? init->n_states() : opts.n_states;
  const Pooled pooled = pooled_moments(sequences, dim, opts.var_floor);
  std::mt19937_64 rng(opts.seed);

  FitResult res;
  GaussianHmm& m = res.model;
  m.pi.assign(n, 1.0 / n);
  m.trans.assign(n, std::vector<double>(n, n == 1 ? 1.0 : 0.2 / (n - 1)));
  for (int i = 0; i < n; ++i) m.trans[i][i] = n == 1 ? 1.0 : 0.8;
  m.mean = kmeans_means(frames, n, rng);
  m.var.assign(n, pooled.var);
  if (init != nullptr) m = *init;

  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    std::vector<double> pi_acc(n, 0.0), gamma_sum(n, 0.0);
    std::vector<std::vector<double>> xi_acc(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> mean_acc(n, std::vector<double>(dim, 0.0));
    std::vector<std::vector<double>> sq_acc(n, std::vector<double>(dim, 0.0));
    double total = 0.0;

    for (const auto& seq : sequences) {
      const ForwardPass f = forward(m, seq);
      const std::size_t len = seq.size();
      for (double c : f.log_scale) total += c;
      // Scaled backward: beta_t(i) = sum_j a_ij b_j(o_{t+1}) beta_{t+1}(j) / c_{t+1}.
      const std::vector<double>& c = f.scale;
      std::vector<std::vector<double>> beta(len, std::vector<double>(n, 1.0));
      for (std::size_t t = len - 1; t-- > 0;) {
        for (int i = 0; i < n; ++i) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += m.trans[i][j] * f.emit[t + 1][j] * beta[t + 1][j];
          beta[t][i] = s / c[t + 1];
        }
      }
      for (std::size_t t = 0; t < len; ++t) {
        for (int j = 0; j < n; ++j) {
          const double g = f.alpha[t][j] * beta[t][j];
          if (t == 0) pi_acc[j] += g;
          gamma_sum[j] += g;
          for (int d = 0; d < dim; ++d) {
            mean_acc[j][d] += g * seq[t][d];
            sq_acc[j][d] += g * seq[t][d] * seq[t][d];
          }
        }
        if (t + 1 < len) {
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              xi_acc[i][j] += f.alpha[t][i] * m.trans[i][j] * f.emit[t + 1][j] * beta[t + 1][j] / c[t + 1];
            }
          }
        }
      }
    }

    res.loglik_trace.push_back(total);
    res.iterations = iter + 1;
    if (iter > 0 && total - prev < opts.tol) {
      res.converged = true;
      break;
    }
    prev = total;

    // M-step.
    const double n_seq = static_cast<double>(sequences.size());
    for (int j = 0; j < n; ++j) m.pi[j] = pi_acc[j] / n_seq;
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += xi_acc[i][j];
      for (int j = 0; j < n; ++j) m.trans[i][j] = row > 0.0 ? xi_acc[i][j] / row : 1.0 / n;
    }
    for (int j = 0; j < n; ++j) {
      if (gamma_sum[j] < kStarved) {
        const auto* f = frames[std::uniform_int_distribution<std::size_t>(0, frames.size() - 1)(rng)];
        m.mean[j] = *f;
        m.var[j] = pooled.var;
        std::fill(m.trans[j].begin(), m.trans[j].end(), 1.0 / n);
        ++res.reinitialized_states;
        log::warn("HMM state " + std::to_string(j) + " starved at iteration " + std::to_string(iter + 1) +
                  "; restarted from a random frame");
        continue;
      }
      for (int d = 0; d < dim; ++d) {
        const double mu = mean_acc[j][d] / gamma_sum[j];
        m.mean[j][d] = mu;
        m.var[j][d] = std::max(sq_acc[j][d] / gamma_sum[j] - mu * mu, opts.var_floor);
      }
    }
    // Renormalize against rounding so the stochastic invariants stay tight.
    double ps = 0.0;
    for (double p : m.pi) ps += p;
    for (double& p : m.pi) p /= ps;
    for (auto& row : m.trans) {
      double rs = 0.0;
      for (double p : row) rs += p;
      for (double& p : row) p /= rs;
    }
  }
  if (!res.converged) {
    // Trace entry for the final parameters.
    double total = 0.0;
    for (const auto& seq : sequences) {
      for (double c : forward(m, seq).log_scale) total += c;
    }
    res.loglik_trace.push_back(total);
  }
  return res;
}

GaussianHmm with_probability_floor(GaussianHmm model, double floor) {
  model.validate();
  const double n = static_cast<double>(model.n_states());
  if (!(floor >= 0.0) || floor * n >= 1.0) throw InvalidArgument("probability floor must be in [0, 1/n_states)");
  auto lift = [floor](std::vector<double>& row) {
    double sum = 0.0;
    for (double& p : row) sum += (p = std::max(p, floor));
    for (double& p : row) p /= sum;
  };
  lift(model.pi);
  for (auto& row : model.trans) lift(row);
  return model;
}

std::vector<double> prefix_log_likelihoods(const GaussianHmm& model, const Sequence& seq) {
  model.validate();
  check_sequence(model, seq);
  const ForwardPass f = forward(model, seq);
  std::vector<double> out(seq.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    acc += f.log_scale[t];
    out[t] = acc;
  }
  return out;
}

double prefix_log_likelihood(const GaussianHmm& model, const Sequence& seq, int t) {
  if (t < 1 || t > static_cast<int>(seq.size())) throw InvalidArgument("prefix length out of range");
  const Sequence prefix(seq.begin(), seq.begin() + t);
  return prefix_log_likelihoods(model, prefix).back();
}

std::vector<double> anomaly_scores(const GaussianHmm& model, const Sequence& seq) {
  auto ll = prefix_log_likelihoods(model, seq);
  for (std::size_t t = 0; t < ll.size(); ++t) ll[t] = -ll[t] / static_cast<double>(t + 1);
  return ll;
}

}  // namespace motad::hmm

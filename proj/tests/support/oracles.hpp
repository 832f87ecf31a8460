#pragma once
// Independent reference computations used to check library results. Nothing
// here calls into the code under test beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "motad/imaging/types.hpp"

namespace oracle {

/// Lower median by full sort.
inline float sorted_lower_median(std::vector<float> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

/// Periodic band-limited texture on a size x size torus, evaluated at a
/// continuous position so shifted copies are exact.
struct PeriodicTexture {
  struct Wave {
    int kx, ky;
    double amp, phase;
  };
  int size = 64;
  std::vector<Wave> waves;

  explicit PeriodicTexture(std::uint32_t seed, int size_ = 64, int max_freq = 5) : size(size_) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> f(-max_freq, max_freq);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    while (waves.size() < 10) {
      const int kx = f(rng);
      const int ky = f(rng);
      if (kx == 0 && ky == 0) continue;
      waves.push_back({kx, ky, 0.04, ph(rng)});
    }
  }

  double operator()(double x, double y) const {
    double v = 0.5;
    for (const auto& w : waves) {
      v += w.amp * std::cos(2.0 * std::numbers::pi * (w.kx * x + w.ky * y) / size + w.phase);
    }
    return v;
  }

  /// Image whose pixel (x, y) holds texture(x - sx, y - sy): content moved by (sx, sy).
  motad::Image render(double sx = 0.0, double sy = 0.0) const {
    motad::Image img(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) img.at(x, y) = static_cast<float>((*this)(x - sx, y - sy));
    }
    return img;
  }
};

/// Non-periodic band-limited texture: random plane waves with continuous
/// frequencies, evaluated exactly at any transformed coordinate.
struct PlaneWaveTexture {
  struct Wave {
    double fx, fy, amp, phase;
  };
  std::vector<Wave> waves;

  explicit PlaneWaveTexture(std::uint32_t seed, double max_cycles_per_px = 0.2, int count = 24) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> f(-max_cycles_per_px, max_cycles_per_px);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    while (static_cast<int>(waves.size()) < count) {
      const double fx = f(rng);
      const double fy = f(rng);
      if (std::hypot(fx, fy) < 0.02 || std::hypot(fx, fy) > max_cycles_per_px) continue;
      waves.push_back({fx, fy, 0.4 / count, ph(rng)});
    }
  }

  double operator()(double x, double y) const {
    double v = 0.5;
    for (const auto& w : waves) {
      v += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
    }
    return std::clamp(v, 0.0, 1.0);
  }

  /// Image b with b(tf(x)) = texture(x): the texture moved by tf.
  motad::Image render(int w, int h, const motad::SimilarityTransform& tf = {}) const {
    const motad::SimilarityTransform inv = tf.inverse();
    motad::Image img(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sx = 0.0;
        double sy = 0.0;
        inv.apply(x, y, sx, sy);
        img.at(x, y) = static_cast<float>((*this)(sx, sy));
      }
    }
    return img;
  }
};

/// Foreground plus every background pixel not reachable from the border by
/// 4-connected background steps (BFS flood fill).
inline std::vector<std::uint8_t> flood_fill_holes(const std::vector<std::uint8_t>& fg, int w, int h) {
  std::vector<std::uint8_t> outside(fg.size(), 0);
  std::queue<std::pair<int, int>> q;
  auto push = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const auto i = static_cast<std::size_t>(y) * w + x;
    if (fg[i] || outside[i]) return;
    outside[i] = 1;
    q.push({x, y});
  };
  for (int x = 0; x < w; ++x) {
    push(x, 0);
    push(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    push(0, y);
    push(w - 1, y);
  }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    push(x + 1, y);
    push(x - 1, y);
    push(x, y + 1);
    push(x, y - 1);
  }
  std::vector<std::uint8_t> out(fg.size());
  for (std::size_t i = 0; i < fg.size(); ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

/// Area under ROC by counting ordered (positive, negative) pairs, ties 1/2.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Average precision with tied scores handled as one block: each distinct
/// threshold contributes (recall gain) x (precision at that threshold).
inline double tied_average_precision(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds(s.begin(), s.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double pos = 0;
  for (int v : y) pos += v;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0;
    double fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
    }
    const double recall = tp / pos;
    ap += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
  }
  return ap;
}

/// Diagonal-Gaussian HMM log-likelihood by explicit sum over all state paths.
inline double brute_force_loglik(const std::vector<double>& pi, const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& mean,
                                 const std::vector<std::vector<double>>& var,
                                 const std::vector<std::vector<double>>& obs) {
  const int n = static_cast<int>(pi.size());
  const int t_len = static_cast<int>(obs.size());
  auto emit = [&](int s, const std::vector<double>& o) {
    double lp = 0.0;
    for (std::size_t d = 0; d < o.size(); ++d) {
      const double diff = o[d] - mean[s][d];
      lp += -0.5 * std::log(2.0 * std::numbers::pi * var[s][d]) - 0.5 * diff * diff / var[s][d];
    }
    return std::exp(lp);
  };
  std::vector<int> path(t_len, 0);
  double total = 0.0;
  while (true) {
    double p = pi[path[0]] * emit(path[0], obs[0]);
    for (int t = 1; t < t_len; ++t) p *= a[path[t - 1]][path[t]] * emit(path[t], obs[t]);
    total += p;
    int k = t_len - 1;
    while (k >= 0 && ++path[k] == n) path[k--] = 0;
    if (k < 0) break;
  }
  return std::log(total);
}

}  // namespace oracle

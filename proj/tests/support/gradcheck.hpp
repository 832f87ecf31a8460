#pragma once
// Central finite-difference check of reverse-mode gradients.
//
// The op under test is reduced to a scalar through a fixed random projection
// sum_i w_i y_i, so every output element contributes to every input gradient.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "motad/neural/tensor.hpp"

namespace motad::testing {

struct GradCheckResult {
  bool ok = true;
  double worst_excess = 0.0;  // max over elements of |a-n| - tolerance
  std::string detail;
};

using TensorFn = std::function<nn::Tensor(const std::vector<nn::Tensor>&)>;

inline double grad_tolerance(double a, double n) { return std::max(1e-3 * std::max(std::fabs(a), std::fabs(n)), 1e-5); }

/// Compares analytic and numeric gradients for every element of every input.
inline GradCheckResult grad_check(const TensorFn& fn, std::vector<nn::Tensor> inputs, std::mt19937_64& rng,
                                  double h = 1e-6) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> proj;
  auto scalar = [&](const std::vector<nn::Tensor>& in) {
    nn::Tensor y = fn(in);
    if (proj.empty()) {
      proj.resize(y.numel());
      for (double& w : proj) w = g(rng);
    }
    return nn::weighted_sum(y, proj);
  };

  for (auto& t : inputs) t.zero_grad();
  scalar(inputs).backward();

  GradCheckResult res;
  res.worst_excess = -1.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    nn::Tensor& t = inputs[k];
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.numel(), 0.0);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double x0 = t.data()[i];
      double fp, fm;
      {
        nn::NoGradGuard ng;
        t.data()[i] = x0 + h;
        fp = scalar(inputs).item();
        t.data()[i] = x0 - h;
        fm = scalar(inputs).item();
      }
      t.data()[i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double excess = std::fabs(analytic[i] - numeric) - grad_tolerance(analytic[i], numeric);
      if (excess > res.worst_excess) res.worst_excess = excess;
      if (excess > 0.0 && res.ok) {
        res.ok = false;
        res.detail = "input " + std::to_string(k) + " element " + std::to_string(i) + ": analytic " +
                     std::to_string(analytic[i]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return res;
}

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double sd = 1.0, bool grad = true) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return nn::Tensor::from(std::move(shape), std::move(v), grad);
}

/// Same as random_tensor but every entry at least `gap` away from zero, so
/// kinks at zero stay outside the difference stencil.
inline nn::Tensor random_tensor_away_from_zero(nn::Shape shape, std::mt19937_64& rng, double gap = 1e-3) {
  nn::Tensor t = random_tensor(std::move(shape), rng);
  for (double& x : t.data()) {
    if (std::fabs(x) < gap) x = x < 0 ? -gap - std::fabs(x) : gap + x;
  }
  return t;
}

struct OpCase {
  std::string op;
  std::function<GradCheckResult(std::mt19937_64&)> run;
};

/// One randomized case per call for each differentiable op; used by the unit
/// suite and the acceptance run.
inline std::vector<OpCase> op_cases() {
  using nn::Tensor;
  using V = std::vector<Tensor>;
  std::vector<OpCase> c;
  auto dims = [](std::mt19937_64& r, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(r); };

  c.push_back({"conv2d", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), ci = dims(r, 1, 3), co = dims(r, 1, 3);
                 const int k = std::uniform_int_distribution<int>(0, 2)(r) == 0 ? 1 : 3;
                 const int h = dims(r, 2, 5), w = dims(r, 2, 5);
                 return grad_check([](const V& v) { return nn::conv2d(v[0], v[1], v[2]); },
                                   {random_tensor({n, ci, h, w}, r), random_tensor({co, ci, k, k}, r),
                                    random_tensor({co}, r)},
                                   r);
               }});
  c.push_back({"avg_pool2", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), ch = dims(r, 1, 3), h = 2 * dims(r, 1, 3), w = 2 * dims(r, 1, 3);
                 return grad_check([](const V& v) { return nn::avg_pool2(v[0]); }, {random_tensor({n, ch, h, w}, r)},
                                   r);
               }});
  c.push_back({"upsample2", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), ch = dims(r, 1, 3), h = dims(r, 1, 4), w = dims(r, 1, 4);
                 return grad_check([](const V& v) { return nn::upsample2(v[0]); }, {random_tensor({n, ch, h, w}, r)},
                                   r);
               }});
  c.push_back({"relu", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 1, 12);
                 return grad_check([](const V& v) { return nn::relu(v[0]); },
                                   {random_tensor_away_from_zero({n, d}, r)}, r);
               }});
  c.push_back({"exp", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 1, 8);
                 return grad_check([](const V& v) { return nn::exp(v[0]); }, {random_tensor({n, d}, r)}, r);
               }});
  c.push_back({"concat_channels", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), a = dims(r, 1, 3), b = dims(r, 1, 3), h = dims(r, 1, 4),
                           w = dims(r, 1, 4);
                 return grad_check([](const V& v) { return nn::concat_channels(v[0], v[1]); },
                                   {random_tensor({n, a, h, w}, r), random_tensor({n, b, h, w}, r)}, r);
               }});
  c.push_back({"global_avg_pool", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), ch = dims(r, 1, 4), h = dims(r, 1, 4), w = dims(r, 1, 4);
                 return grad_check([](const V& v) { return nn::global_avg_pool(v[0]); },
                                   {random_tensor({n, ch, h, w}, r)}, r);
               }});
  c.push_back({"linear", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), i = dims(r, 1, 6), o = dims(r, 1, 6);
                 return grad_check([](const V& v) { return nn::linear(v[0], v[1], v[2]); },
                                   {random_tensor({n, i}, r), random_tensor({o, i}, r), random_tensor({o}, r)}, r);
               }});
  c.push_back({"slice_columns", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 2, 8);
                 const int b = dims(r, 0, d - 1), cnt = dims(r, 1, d - b);
                 return grad_check([=](const V& v) { return nn::slice_columns(v[0], b, cnt); },
                                   {random_tensor({n, d}, r)}, r);
               }});
  c.push_back({"reparameterize", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 1, 6);
                 Tensor eps = random_tensor({n, d}, r, 1.0, false);
                 return grad_check([eps](const V& v) { return nn::reparameterize(v[0], v[1], eps); },
                                   {random_tensor({n, d}, r), random_tensor({n, d}, r, 0.5)}, r);
               }});
  c.push_back({"broadcast_spatial", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), d = dims(r, 1, 4), h = dims(r, 1, 4), w = dims(r, 1, 4);
                 return grad_check([=](const V& v) { return nn::broadcast_spatial(v[0], h, w); },
                                   {random_tensor({n, d}, r)}, r);
               }});
  c.push_back({"add", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 1, 8);
                 return grad_check([](const V& v) { return nn::add(v[0], v[1]); },
                                   {random_tensor({n, d}, r), random_tensor({n, d}, r)}, r);
               }});
  c.push_back({"scale", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 1, 8);
                 const double s = std::normal_distribution<double>(0.0, 2.0)(r);
                 return grad_check([=](const V& v) { return nn::scale(v[0], s); }, {random_tensor({n, d}, r)}, r);
               }});
  c.push_back({"mse", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 2), ch = dims(r, 1, 2), h = dims(r, 1, 4), w = dims(r, 1, 4);
                 return grad_check([](const V& v) { return nn::mse(v[0], v[1]); },
                                   {random_tensor({n, ch, h, w}, r), random_tensor({n, ch, h, w}, r)}, r);
               }});
  c.push_back({"mse_per_sample", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), ch = dims(r, 1, 2), h = dims(r, 1, 3), w = dims(r, 1, 3);
                 return grad_check([](const V& v) { return nn::mse_per_sample(v[0], v[1]); },
                                   {random_tensor({n, ch, h, w}, r), random_tensor({n, ch, h, w}, r)}, r);
               }});
  c.push_back({"kl_diag", [=](std::mt19937_64& r) {
                 const int n = dims(r, 1, 3), d = dims(r, 1, 6);
                 return grad_check([](const V& v) { return nn::kl_diag(v[0], v[1], v[2], v[3]); },
                                   {random_tensor({n, d}, r), random_tensor({n, d}, r, 0.5),
                                    random_tensor({n, d}, r), random_tensor({n, d}, r, 0.5)},
                                   r);
               }});
  return c;
}

}  // namespace motad::testing

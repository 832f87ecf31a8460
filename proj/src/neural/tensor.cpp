#include "motad/neural/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <unordered_set>

#include "motad/errors.hpp"
#include "motad/simd/kernels.hpp"

namespace motad::nn {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t count(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  require(t.defined() && t.shape().size() == rank, what);
}

// Output node wired to its inputs when any of them needs a gradient.
std::shared_ptr<Node> make_result(Shape shape, std::initializer_list<const Tensor*> inputs) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.assign(count(n->shape), 0.0);
  if (!g_grad_enabled) return n;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (const Tensor* t : inputs) n->parents.push_back(t->node());
  }
  return n;
}

bool wants_grad(const Node& n) { return n.requires_grad; }

// cols[(c*k*k + ky*k + kx), y*W + x] = x[c, y+ky-p, x+kx-p] (0 outside)
void im2col(const double* x, int c, int h, int w, int k, double* cols) {
  const int p = k / 2;
  const int hw = h * w;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + static_cast<std::size_t>((ci * k + ky) * k + kx) * hw;
        const double* plane = x + static_cast<std::size_t>(ci) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - p;
          double* dst = row + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + sy * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - p;
            dst[xx] = (sx >= 0 && sx < w) ? src[sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int c, int h, int w, int k, double* x) {
  const int p = k / 2;
  const int hw = h * w;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((ci * k + ky) * k + kx) * hw;
        double* plane = x + static_cast<std::size_t>(ci) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - p;
          if (sy < 0 || sy >= h) continue;
          const double* src = row + y * w;
          double* dst = plane + sy * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - p;
            if (sx >= 0 && sx < w) dst[sx] += src[xx];
          }
        }
      }
    }
  }
}

void transpose(const double* a, int rows, int cols, double* out) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(c) * rows + r] = a[static_cast<std::size_t>(r) * cols + c];
  }
}

}  // namespace

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  for (int d : shape) require(d > 0, "tensor dimensions must be positive");
  auto n = std::make_shared<Node>();
  n->value.assign(count(shape), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (int d : shape) require(d > 0, "tensor dimensions must be positive");
  require(values.size() == count(shape), "value count does not match shape");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::grad() { return node_->grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
  require(numel() == 1, "item() needs a single-element tensor");
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  require(numel() == 1, "backward() needs a scalar");
  if (!node_->requires_grad) return;
  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 4, "conv2d: input must be NCHW");
  require_rank(w, 4, "conv2d: weight must be [O,C,k,k]");
  require_rank(b, 1, "conv2d: bias must be [O]");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w.dim(0), k = w.dim(2);
  require(w.dim(1) == c && w.dim(3) == k && k % 2 == 1, "conv2d: weight shape mismatch");
  require(b.dim(0) == o, "conv2d: bias size mismatch");
  const int hw = h * wd;
  const int ckk = c * k * k;
  auto out = make_result({n, o, h, wd}, {&x, &w, &b});
  const auto& gemm = simd::kernels().gemm_nn;
  std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
  for (int s = 0; s < n; ++s) {
    const double* xs = x.data().data() + static_cast<std::size_t>(s) * c * hw;
    double* ys = out->value.data() + static_cast<std::size_t>(s) * o * hw;
    for (int oc = 0; oc < o; ++oc) std::fill(ys + oc * hw, ys + (oc + 1) * hw, b.data()[oc]);
    const double* src = xs;
    if (k != 1) {
      im2col(xs, c, h, wd, k, cols.data());
      src = cols.data();
    }
    gemm(o, hw, ckk, w.data().data(), ckk, src, hw, ys, hw);
  }
  if (wants_grad(*out)) {
    out->backward = [n, c, h, wd, o, k, hw, ckk](Node& self) {
      Node& xn = *self.parents[0];
      Node& wn = *self.parents[1];
      Node& bn = *self.parents[2];
      const auto& gemm = simd::kernels().gemm_nn;
      std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
      std::vector<double> cols_t(cols.size());
      std::vector<double> w_t(static_cast<std::size_t>(ckk) * o);
      transpose(wn.value.data(), o, ckk, w_t.data());
      for (int s = 0; s < n; ++s) {
        const double* xs = xn.value.data() + static_cast<std::size_t>(s) * c * hw;
        const double* gy = self.grad.data() + static_cast<std::size_t>(s) * o * hw;
        if (bn.requires_grad) {
          auto& gb = bn.ensure_grad();
          for (int oc = 0; oc < o; ++oc) {
            gb[oc] += std::accumulate(gy + oc * hw, gy + (oc + 1) * hw, 0.0);
          }
        }
        if (wn.requires_grad) {
          if (k != 1) {
            im2col(xs, c, h, wd, k, cols.data());
            transpose(cols.data(), ckk, hw, cols_t.data());
          } else {
            transpose(xs, ckk, hw, cols_t.data());
          }
          gemm(o, ckk, hw, gy, hw, cols_t.data(), ckk, wn.ensure_grad().data(), ckk);
        }
        if (xn.requires_grad) {
          double* gx = xn.ensure_grad().data() + static_cast<std::size_t>(s) * c * hw;
          if (k == 1) {
            gemm(ckk, hw, o, w_t.data(), o, gy, hw, gx, hw);
          } else {
            std::fill(cols.begin(), cols.end(), 0.0);
            gemm(ckk, hw, o, w_t.data(), o, gy, hw, cols.data(), hw);
            col2im_add(cols.data(), c, h, wd, k, gx);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor avg_pool2(const Tensor& x) {
  require_rank(x, 4, "avg_pool2: input must be NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2: spatial size must be even");
  const int oh = h / 2, ow = w / 2;
  auto out = make_result({n, c, oh, ow}, {&x});
  const auto in = x.data();
  for (int p = 0; p < n * c; ++p) {
    const double* src = in.data() + static_cast<std::size_t>(p) * h * w;
    double* dst = out->value.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        const double* q = src + 2 * y * w + 2 * xx;
        dst[y * ow + xx] = 0.25 * (q[0] + q[1] + q[w] + q[w + 1]);
      }
    }
  }
  if (wants_grad(*out)) {
    out->backward = [n, c, h, w, oh, ow](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (int p = 0; p < n * c; ++p) {
        double* dst = g.data() + static_cast<std::size_t>(p) * h * w;
        const double* src = self.grad.data() + static_cast<std::size_t>(p) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) {
            const double v = 0.25 * src[y * ow + xx];
            double* q = dst + 2 * y * w + 2 * xx;
            q[0] += v;
            q[1] += v;
            q[w] += v;
            q[w + 1] += v;
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor upsample2(const Tensor& x) {
  require_rank(x, 4, "upsample2: input must be NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = 2 * h, ow = 2 * w;
  auto out = make_result({n, c, oh, ow}, {&x});
  const auto in = x.data();
  for (int p = 0; p < n * c; ++p) {
    const double* src = in.data() + static_cast<std::size_t>(p) * h * w;
    double* dst = out->value.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[(y / 2) * w + xx / 2];
    }
  }
  if (wants_grad(*out)) {
    out->backward = [n, c, h, w, oh, ow](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (int p = 0; p < n * c; ++p) {
        double* dst = g.data() + static_cast<std::size_t>(p) * h * w;
        const double* src = self.grad.data() + static_cast<std::size_t>(p) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) dst[(y / 2) * w + xx / 2] += src[y * ow + xx];
        }
      }
    };
  }
  return Tensor(out);
}

Tensor relu(const Tensor& x) {
  auto out = make_result(x.shape(), {&x});
  const auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) out->value[i] = in[i] > 0.0 ? in[i] : 0.0;
  if (wants_grad(*out)) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (p.value[i] > 0.0) g[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor exp(const Tensor& x) {
  auto out = make_result(x.shape(), {&x});
  const auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) out->value[i] = std::exp(in[i]);
  if (wants_grad(*out)) {
    out->backward = [](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
    };
  }
  return Tensor(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels: inputs must be NCHW");
  require_rank(b, 4, "concat_channels: inputs must be NCHW");
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  require(b.dim(0) == n && b.dim(2) == h && b.dim(3) == w, "concat_channels: shape mismatch");
  const std::size_t sa = static_cast<std::size_t>(ca) * h * w;
  const std::size_t sb = static_cast<std::size_t>(cb) * h * w;
  auto out = make_result({n, ca + cb, h, w}, {&a, &b});
  for (int s = 0; s < n; ++s) {
    std::copy_n(a.data().data() + s * sa, sa, out->value.data() + s * (sa + sb));
    std::copy_n(b.data().data() + s * sb, sb, out->value.data() + s * (sa + sb) + sa);
  }
  if (wants_grad(*out)) {
    out->backward = [n, sa, sb](Node& self) {
      for (int which = 0; which < 2; ++which) {
        Node& p = *self.parents[which];
        if (!p.requires_grad) continue;
        auto& g = p.ensure_grad();
        const std::size_t len = which == 0 ? sa : sb;
        const std::size_t off = which == 0 ? 0 : sa;
        for (int s = 0; s < n; ++s) {
          const double* src = self.grad.data() + s * (sa + sb) + off;
          double* dst = g.data() + s * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
      }
    };
  }
  return Tensor(out);
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool: input must be NCHW");
  const int n = x.dim(0), c = x.dim(1);
  const int hw = x.dim(2) * x.dim(3);
  auto out = make_result({n, c}, {&x});
  for (int p = 0; p < n * c; ++p) {
    const double* src = x.data().data() + static_cast<std::size_t>(p) * hw;
    out->value[p] = std::accumulate(src, src + hw, 0.0) / hw;
  }
  if (wants_grad(*out)) {
    out->backward = [n, c, hw](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (int p = 0; p < n * c; ++p) {
        const double v = self.grad[p] / hw;
        double* dst = g.data() + static_cast<std::size_t>(p) * hw;
        for (int i = 0; i < hw; ++i) dst[i] += v;
      }
    };
  }
  return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear: input must be [N,I]");
  require_rank(w, 2, "linear: weight must be [O,I]");
  require_rank(b, 1, "linear: bias must be [O]");
  const int n = x.dim(0), in = x.dim(1), o = w.dim(0);
  require(w.dim(1) == in && b.dim(0) == o, "linear: shape mismatch");
  auto out = make_result({n, o}, {&x, &w, &b});
  const auto& k = simd::kernels();
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < o; ++j) {
      out->value[s * o + j] = b.data()[j] + k.dot_d(x.data().data() + s * in, w.data().data() + j * in, in);
    }
  }
  if (wants_grad(*out)) {
    out->backward = [n, in, o](Node& self) {
      Node& xn = *self.parents[0];
      Node& wn = *self.parents[1];
      Node& bn = *self.parents[2];
      const auto& k = simd::kernels();
      for (int s = 0; s < n; ++s) {
        for (int j = 0; j < o; ++j) {
          const double g = self.grad[s * o + j];
          if (bn.requires_grad) bn.ensure_grad()[j] += g;
          if (wn.requires_grad) k.axpy_d(g, xn.value.data() + s * in, wn.ensure_grad().data() + j * in, in);
          if (xn.requires_grad) k.axpy_d(g, wn.value.data() + j * in, xn.ensure_grad().data() + s * in, in);
        }
      }
    };
  }
  return Tensor(out);
}

Tensor slice_columns(const Tensor& x, int begin, int count) {
  require_rank(x, 2, "slice_columns: input must be [N,D]");
  const int n = x.dim(0), d = x.dim(1);
  require(begin >= 0 && count > 0 && begin + count <= d, "slice_columns: range out of bounds");
  auto out = make_result({n, count}, {&x});
  for (int s = 0; s < n; ++s) {
    std::copy_n(x.data().data() + s * d + begin, count, out->value.data() + s * count);
  }
  if (wants_grad(*out)) {
    out->backward = [n, d, begin, count](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (int s = 0; s < n; ++s) {
        for (int j = 0; j < count; ++j) g[s * d + begin + j] += self.grad[s * count + j];
      }
    };
  }
  return Tensor(out);
}

Tensor reparameterize(const Tensor& mu, const Tensor& log_sigma, const Tensor& eps) {
  require(mu.shape() == log_sigma.shape() && mu.shape() == eps.shape(),
          "reparameterize: shape mismatch");
  auto out = make_result(mu.shape(), {&mu, &log_sigma});
  const auto m = mu.data();
  const auto ls = log_sigma.data();
  const auto e = eps.data();
  for (std::size_t i = 0; i < m.size(); ++i) out->value[i] = m[i] + std::exp(ls[i]) * e[i];
  if (wants_grad(*out)) {
    std::vector<double> noise(e.begin(), e.end());
    out->backward = [noise = std::move(noise)](Node& self) {
      Node& mn = *self.parents[0];
      Node& sn = *self.parents[1];
      if (mn.requires_grad) {
        auto& g = mn.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (sn.requires_grad) {
        auto& g = sn.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * std::exp(sn.value[i]) * noise[i];
      }
    };
  }
  return Tensor(out);
}

Tensor broadcast_spatial(const Tensor& z, int height, int width) {
  require_rank(z, 2, "broadcast_spatial: input must be [N,D]");
  require(height > 0 && width > 0, "broadcast_spatial: size must be positive");
  const int n = z.dim(0), d = z.dim(1);
  const int hw = height * width;
  auto out = make_result({n, d, height, width}, {&z});
  for (int p = 0; p < n * d; ++p) {
    std::fill_n(out->value.data() + static_cast<std::size_t>(p) * hw, hw, z.data()[p]);
  }
  if (wants_grad(*out)) {
    out->backward = [n, d, hw](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (int p = 0; p < n * d; ++p) {
        const double* src = self.grad.data() + static_cast<std::size_t>(p) * hw;
        g[p] += std::accumulate(src, src + hw, 0.0);
      }
    };
  }
  return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch");
  auto out = make_result(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.data()[i] + b.data()[i];
  if (wants_grad(*out)) {
    out->backward = [](Node& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, double s) {
  auto out = make_result(a.shape(), {&a});
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = s * a.data()[i];
  if (wants_grad(*out)) {
    out->backward = [s](Node& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  require(prediction.shape() == target.shape(), "mse: shape mismatch");
  auto out = make_result({1}, {&prediction, &target});
  const auto p = prediction.data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  const double inv = 1.0 / static_cast<double>(p.size());
  out->value[0] = acc * inv;
  if (wants_grad(*out)) {
    out->backward = [inv](Node& self) {
      Node& pn = *self.parents[0];
      Node& tn = *self.parents[1];
      const double g0 = self.grad[0] * 2.0 * inv;
      for (int which = 0; which < 2; ++which) {
        Node& q = which == 0 ? pn : tn;
        if (!q.requires_grad) continue;
        auto& g = q.ensure_grad();
        const double sign = which == 0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * g0 * (pn.value[i] - tn.value[i]);
      }
    };
  }
  return Tensor(out);
}

Tensor mse_per_sample(const Tensor& prediction, const Tensor& target) {
  require(prediction.shape() == target.shape() && !prediction.shape().empty(),
          "mse_per_sample: shape mismatch");
  const int n = prediction.dim(0);
  const std::size_t per = prediction.numel() / static_cast<std::size_t>(n);
  auto out = make_result({n}, {&prediction, &target});
  for (int s = 0; s < n; ++s) {
    double acc = 0.0;
    for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
      const double d = prediction.data()[i] - target.data()[i];
      acc += d * d;
    }
    out->value[s] = acc / static_cast<double>(per);
  }
  if (wants_grad(*out)) {
    out->backward = [n, per](Node& self) {
      Node& pn = *self.parents[0];
      Node& tn = *self.parents[1];
      for (int which = 0; which < 2; ++which) {
        Node& q = which == 0 ? pn : tn;
        if (!q.requires_grad) continue;
        auto& g = q.ensure_grad();
        const double sign = which == 0 ? 1.0 : -1.0;
        for (int s = 0; s < n; ++s) {
          const double g0 = self.grad[s] * 2.0 / static_cast<double>(per);
          for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
            g[i] += sign * g0 * (pn.value[i] - tn.value[i]);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor kl_diag(const Tensor& mu_q, const Tensor& log_sigma_q, const Tensor& mu_p,
               const Tensor& log_sigma_p) {
  require_rank(mu_q, 2, "kl_diag: parameters must be [N,D]");
  require(mu_q.shape() == log_sigma_q.shape() && mu_q.shape() == mu_p.shape() &&
              mu_q.shape() == log_sigma_p.shape(),
          "kl_diag: dimension mismatch");
  const int n = mu_q.dim(0);
  auto out = make_result({1}, {&mu_q, &log_sigma_q, &mu_p, &log_sigma_p});
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_q.numel(); ++i) {
    const double lq = log_sigma_q.data()[i];
    const double lp = log_sigma_p.data()[i];
    const double dm = mu_q.data()[i] - mu_p.data()[i];
    // log(sp/sq) + (sq^2 + dm^2) / (2 sp^2) - 1/2
    acc += (lp - lq) + (std::exp(2.0 * (lq - lp)) + dm * dm * std::exp(-2.0 * lp)) * 0.5 - 0.5;
  }
  out->value[0] = acc / n;
  if (wants_grad(*out)) {
    out->backward = [n](Node& self) {
      Node& mq = *self.parents[0];
      Node& sq = *self.parents[1];
      Node& mp = *self.parents[2];
      Node& sp = *self.parents[3];
      const double g0 = self.grad[0] / n;
      for (std::size_t i = 0; i < mq.value.size(); ++i) {
        const double lq = sq.value[i];
        const double lp = sp.value[i];
        const double dm = mq.value[i] - mp.value[i];
        const double ratio = std::exp(2.0 * (lq - lp));
        const double inv_vp = std::exp(-2.0 * lp);
        if (mq.requires_grad) mq.ensure_grad()[i] += g0 * dm * inv_vp;
        if (mp.requires_grad) mp.ensure_grad()[i] -= g0 * dm * inv_vp;
        if (sq.requires_grad) sq.ensure_grad()[i] += g0 * (ratio - 1.0);
        if (sp.requires_grad) sp.ensure_grad()[i] += g0 * (1.0 - ratio - dm * dm * inv_vp);
      }
    };
  }
  return Tensor(out);
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
  require(weights.size() == x.numel(), "weighted_sum: weight count mismatch");
  auto out = make_result({1}, {&x});
  out->value[0] = simd::kernels().dot_d(x.data().data(), weights.data(), weights.size());
  if (wants_grad(*out)) {
    std::vector<double> w(weights.begin(), weights.end());
    out->backward = [w = std::move(w)](Node& self) {
      simd::kernels().axpy_d(self.grad[0], w.data(), self.parents[0]->ensure_grad().data(), w.size());
    };
  }
  return Tensor(out);
}

}  // namespace motad::nn

#pragma once
// Dense double-precision tensors with reverse-mode automatic differentiation.
//
// Every op returns a new tensor that remembers its inputs and how to push a
// gradient back into them. backward() on a scalar visits the recorded graph
// in reverse topological order. Image tensors are NCHW, vectors are [N, D].

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace motad::nn {

using Shape = std::vector<int>;

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(int i) const;
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  /// Empty until a backward pass reaches this tensor.
  std::span<double> grad();
  std::span<const double> grad() const;
  bool requires_grad() const;

  double item() const;  // single-element tensors only

  /// Seeds d(this)/d(this) = 1 and accumulates gradients into every leaf that
  /// requires them. Scalar tensors only.
  void backward() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

/// While alive, ops record no graph (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// x [N,C,H,W], w [O,C,k,k] with odd k, b [O]; stride 1, zero padding k/2.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
// 2x2 mean, stride 2; H and W even.
Tensor avg_pool2(const Tensor& x);
// Nearest-neighbour 2x upsampling.
Tensor upsample2(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
// Channel concatenation of NCHW tensors with equal N, H, W.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);
// x [N,I], w [O,I], b [O] -> [N,O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// Columns [begin, begin + count) of a [N,D] tensor.
Tensor slice_columns(const Tensor& x, int begin, int count);
// mu + exp(log_sigma) * eps; eps is treated as a constant.
Tensor reparameterize(const Tensor& mu, const Tensor& log_sigma, const Tensor& eps);
// [N,D] -> [N,D,H,W], every pixel a copy of the vector.
Tensor broadcast_spatial(const Tensor& z, int height, int width);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Mean squared difference over all elements.
Tensor mse(const Tensor& prediction, const Tensor& target);
// Per-sample squared error means, [N].
Tensor mse_per_sample(const Tensor& prediction, const Tensor& target);
// KL(q || p) for diagonal Gaussians given means and log standard deviations
// ([N,D] each): summed over D, averaged over N.
Tensor kl_diag(const Tensor& mu_q, const Tensor& log_sigma_q, const Tensor& mu_p,
               const Tensor& log_sigma_p);
// sum_i x_i * weights_i with constant weights of the same size.
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);

}  // namespace motad::nn

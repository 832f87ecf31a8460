#include "motad/neural/prob_unet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "motad/errors.hpp"

namespace motad::nn {

namespace {

constexpr char kMagic[4] = {'P', 'U', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

Tensor gaussian(Shape shape, double sd, std::mt19937_64& rng) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// He initialization for a ReLU-followed k x k convolution.
template <typename Conv>
Conv he_conv(int in, int out, int k, std::mt19937_64& rng, double gain = 1.0) {
  Conv c;
  c.w = gaussian({out, in, k, k}, gain * std::sqrt(2.0 / (in * k * k)), rng);
  c.b = Tensor::zeros({out}, true);
  return c;
}

template <typename Conv>
Tensor conv_relu(const Conv& c, const Tensor& x) {
  return relu(conv2d(x, c.w, c.b));
}

// Little-endian scalar I/O independent of host byte order.
template <typename T>
void put(std::ostream& os, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U u = std::bit_cast<U>(v);
  char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xffu);
  os.write(b, sizeof(U));
}

template <typename T>
T get(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw FormatError("checkpoint truncated");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(b[i]) << (8 * i);
  return std::bit_cast<T>(u);
}

}  // namespace

void ProbUNetConfig::validate() const {
  if (depth < 1 || base < 1 || latent < 1 || in_channels < 1) {
    throw InvalidArgument("network dimensions must be positive");
  }
  if (side < 1 || side % (1 << (depth - 1)) != 0) {
    throw InvalidArgument("side must be divisible by 2^(depth-1)");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and non-negative");
}

Tensor kl_diag_gaussians(const LatentGaussian& q, const LatentGaussian& p) {
  return kl_diag(q.mu, q.log_sigma, p.mu, p.log_sigma);
}

ProbUNet::ProbUNet(const ProbUNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int d = cfg_.depth;
  int in = cfg_.in_channels;
  for (int l = 0; l < d; ++l) {
    const int ch = cfg_.base << l;
    down_.push_back(he_conv<Conv>(in, ch, 3, rng));
    down_.push_back(he_conv<Conv>(ch, ch, 3, rng));
    in = ch;
  }
  for (int l = d - 2; l >= 0; --l) {
    const int ch = cfg_.base << l;
    up_.push_back(he_conv<Conv>(in + ch, ch, 3, rng));
    up_.push_back(he_conv<Conv>(ch, ch, 3, rng));
    in = ch;
  }
  prior_ = make_encoder(cfg_.in_channels, rng);
  posterior_ = make_encoder(2 * cfg_.in_channels, rng);
  fuser_.push_back(he_conv<Conv>(cfg_.base + cfg_.latent, cfg_.base, 1, rng));
  fuser_.push_back(he_conv<Conv>(cfg_.base, cfg_.base, 1, rng));
  // Linear output layer: unit-gain rather than ReLU gain.
  fuser_.push_back(he_conv<Conv>(cfg_.base, 2, 1, rng, std::sqrt(0.5)));
}

ProbUNet::Encoder ProbUNet::make_encoder(int in_channels, std::mt19937_64& rng) const {
  Encoder e;
  int in = in_channels;
  for (int l = 0; l < cfg_.depth; ++l) {
    const int ch = cfg_.base << l;
    e.convs.push_back(he_conv<Conv>(in, ch, 3, rng));
    e.convs.push_back(he_conv<Conv>(ch, ch, 3, rng));
    in = ch;
  }
  // Small head so both distributions start near N(0, I).
  e.head.w = gaussian({2 * cfg_.latent, in}, 0.1 / std::sqrt(in), rng);
  e.head.b = Tensor::zeros({2 * cfg_.latent}, true);
  return e;
}

void ProbUNet::set_flow_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("flow scale must be positive and finite");
  flow_scale_ = s;
}

std::vector<NamedParameter> ProbUNet::parameters() const {
  std::vector<NamedParameter> out;
  auto conv = [&](const std::string& name, const Conv& c) {
    out.push_back({name + ".w", c.w});
    out.push_back({name + ".b", c.b});
  };
  for (std::size_t i = 0; i < down_.size(); ++i) conv("unet.down" + std::to_string(i), down_[i]);
  for (std::size_t i = 0; i < up_.size(); ++i) conv("unet.up" + std::to_string(i), up_[i]);
  for (const auto& [name, enc] : {std::pair{"prior", &prior_}, std::pair{"posterior", &posterior_}}) {
    for (std::size_t i = 0; i < enc->convs.size(); ++i) conv(std::string(name) + ".conv" + std::to_string(i), enc->convs[i]);
    out.push_back({std::string(name) + ".head.w", enc->head.w});
    out.push_back({std::string(name) + ".head.b", enc->head.b});
  }
  for (std::size_t i = 0; i < fuser_.size(); ++i) conv("fuser" + std::to_string(i), fuser_[i]);
  return out;
}

std::size_t ProbUNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

Tensor ProbUNet::features(const Tensor& past) const {
  const int d = cfg_.depth;
  std::vector<Tensor> skips;
  Tensor x = past;
  for (int l = 0; l < d; ++l) {
    if (l > 0) x = avg_pool2(x);
    x = conv_relu(down_[2 * l], x);
    x = conv_relu(down_[2 * l + 1], x);
    skips.push_back(x);
  }
  for (int i = 0; i < d - 1; ++i) {
    const Tensor& skip = skips[static_cast<std::size_t>(d - 2 - i)];
    x = concat_channels(upsample2(x), skip);
    x = conv_relu(up_[2 * i], x);
    x = conv_relu(up_[2 * i + 1], x);
  }
  return x;
}

LatentGaussian ProbUNet::encode(const Encoder& e, const Tensor& input) const {
  Tensor x = input;
  for (int l = 0; l < cfg_.depth; ++l) {
    if (l > 0) x = avg_pool2(x);
    x = conv_relu(e.convs[2 * l], x);
    x = conv_relu(e.convs[2 * l + 1], x);
  }
  const Tensor h = linear(global_avg_pool(x), e.head.w, e.head.b);
  return {slice_columns(h, 0, cfg_.latent), slice_columns(h, cfg_.latent, cfg_.latent)};
}

LatentGaussian ProbUNet::prior(const Tensor& past) const { return encode(prior_, past); }

LatentGaussian ProbUNet::posterior(const Tensor& past, const Tensor& now) const {
  return encode(posterior_, concat_channels(past, now));
}

Tensor ProbUNet::decode(const Tensor& feat, const Tensor& z) const {
  Tensor x = concat_channels(feat, broadcast_spatial(z, feat.dim(2), feat.dim(3)));
  x = conv_relu(fuser_[0], x);
  x = conv_relu(fuser_[1], x);
  return conv2d(x, fuser_[2].w, fuser_[2].b);
}

TrainStep ProbUNet::forward_train(const Tensor& past, const Tensor& now, const Tensor& noise) const {
  return forward_train(past, now, noise, cfg_.beta);
}

TrainStep ProbUNet::forward_train(const Tensor& past, const Tensor& now, const Tensor& noise, double beta) const {
  if (past.shape() != now.shape() || past.shape().size() != 4 || past.dim(1) != cfg_.in_channels) {
    throw InvalidArgument("forward_train: inputs must be matching [N, 2, H, W] tensors");
  }
  if (noise.shape() != Shape{past.dim(0), cfg_.latent}) throw InvalidArgument("forward_train: noise must be [N, D]");
  const LatentGaussian q = posterior(past, now);
  const LatentGaussian p = prior(past);
  const Tensor z = reparameterize(q.mu, q.log_sigma, noise);
  TrainStep s;
  s.prediction = decode(features(past), z);
  s.mse = mse(s.prediction, now);
  s.kl = kl_diag_gaussians(q, p);
  s.loss = add(s.mse, scale(s.kl, beta));
  return s;
}

void ProbUNet::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidArgument("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  for (int v : {cfg_.side, cfg_.depth, cfg_.base, cfg_.latent, cfg_.in_channels}) put<std::int32_t>(os, v);
  put<double>(os, cfg_.beta);
  put<double>(os, flow_scale_);
  put<std::uint64_t>(os, parameter_count());
  for (const auto& p : parameters()) {
    for (double v : p.tensor.data()) put<float>(os, static_cast<float>(v));
  }
  if (!os) throw InvalidArgument("failed writing checkpoint " + path.string());
}

ProbUNet ProbUNet::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a PUN1 checkpoint");
  if (get<std::uint32_t>(is) != kVersion) throw FormatError("unsupported checkpoint version");
  ProbUNetConfig cfg;
  cfg.side = get<std::int32_t>(is);
  cfg.depth = get<std::int32_t>(is);
  cfg.base = get<std::int32_t>(is);
  cfg.latent = get<std::int32_t>(is);
  cfg.in_channels = get<std::int32_t>(is);
  cfg.beta = get<double>(is);
  const double scale = get<double>(is);
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  ProbUNet m(cfg, 0);
  try {
    m.set_flow_scale(scale);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (get<std::uint64_t>(is) != m.parameter_count()) throw FormatError("checkpoint parameter count mismatch");
  for (auto& p : m.parameters()) {
    for (double& v : p.tensor.data()) v = get<float>(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint payload");
  return m;
}

Tensor flows_to_tensor(const std::vector<const FlowField*>& flows, double scale) {
  if (flows.empty()) throw InvalidArgument("no flows to stack");
  const int w = flows[0]->width(), h = flows[0]->height();
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  std::vector<double> v(flows.size() * 2 * hw);
  const double inv = 1.0 / scale;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    if (flows[i]->width() != w || flows[i]->height() != h) throw InvalidArgument("flows differ in size");
    double* dst = v.data() + i * 2 * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      dst[p] = flows[i]->dx_plane()[p] * inv;
      dst[hw + p] = flows[i]->dy_plane()[p] * inv;
    }
  }
  return Tensor::from({static_cast<int>(flows.size()), 2, h, w}, std::move(v));
}

FlowField tensor_to_flow(const Tensor& t, int index, double scale) {
  if (t.shape().size() != 4 || t.dim(1) != 2 || index < 0 || index >= t.dim(0)) {
    throw InvalidArgument("tensor_to_flow: expected [N, 2, H, W] and a valid index");
  }
  const int h = t.dim(2), w = t.dim(3);
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  FlowField f(w, h);
  const double* src = t.data().data() + static_cast<std::size_t>(index) * 2 * hw;
  for (std::size_t p = 0; p < hw; ++p) {
    f.dx_plane()[p] = static_cast<float>(src[p] * scale);
    f.dy_plane()[p] = static_cast<float>(src[hw + p] * scale);
  }
  return f;
}

}  // namespace motad::nn

#include "smile/sr_branch.hpp"

#include <cmath>

#include "smile/errors.hpp"

namespace smile {

namespace {

constexpr int kKernelNoiseLen = 64;
constexpr int kKernelHidden = 64;

Eigen::ArrayXd he_uniform(Eigen::Index count, int fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::ArrayXd out(count);
  for (Eigen::Index i = 0; i < count; ++i) out[i] = dist(rng);
  return out;
}

}  // namespace

void SrConfig::validate() const {
  if (scale < 1) throw ConfigError("SrConfig: scale must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("SrConfig: kernel_size must be odd and positive");
  }
  if (noise_channels < 1) throw ConfigError("SrConfig: noise_channels must be >= 1");
  if (width < 1) throw ConfigError("SrConfig: width must be >= 1");
}

NoiseInputs NoiseInputs::sample(int lr_height, int lr_width, const SrConfig& cfg,
                                std::mt19937_64& rng) {
  cfg.validate();
  NoiseInputs n;
  n.height = lr_height * cfg.scale;
  n.width = lr_width * cfg.scale;
  n.channels = cfg.noise_channels;
  std::normal_distribution<double> normal(0.0, 1.0);
  n.l_y.resize(static_cast<Eigen::Index>(n.height) * n.width * n.channels);
  for (Eigen::Index i = 0; i < n.l_y.size(); ++i) n.l_y[i] = normal(rng);
  n.l_k.resize(kKernelNoiseLen);
  for (Eigen::Index i = 0; i < n.l_k.size(); ++i) n.l_k[i] = normal(rng);
  return n;
}

SrGeneratorParams SrGeneratorParams::random(const SrConfig& cfg, int endmembers,
                                            std::mt19937_64& rng) {
  cfg.validate();
  if (endmembers <= 0) throw ConfigError("SrGeneratorParams: endmembers must be positive");
  SrGeneratorParams p;
  p.noise_channels = cfg.noise_channels;
  p.width = cfg.width;
  p.endmembers = endmembers;
  p.kernel_size = cfg.kernel_size;
  const int d = cfg.noise_channels, w = cfg.width;
  p.k1 = he_uniform(9L * d * w, 9 * d, rng);
  p.kb1 = Eigen::ArrayXd::Zero(w);
  p.k2 = he_uniform(9L * w * w, 9 * w, rng);
  p.kb2 = Eigen::ArrayXd::Zero(w);
  p.k3 = he_uniform(9L * w * endmembers, 9 * w, rng);
  p.kb3 = Eigen::ArrayXd::Zero(endmembers);
  const int ksq = cfg.kernel_size * cfg.kernel_size;
  p.wk1 = he_uniform(static_cast<Eigen::Index>(kKernelNoiseLen) * kKernelHidden, kKernelNoiseLen,
                     rng);
  p.bk1 = Eigen::ArrayXd::Zero(kKernelHidden);
  p.wk2 = he_uniform(static_cast<Eigen::Index>(kKernelHidden) * ksq, kKernelHidden, rng);
  p.bk2 = Eigen::ArrayXd::Zero(ksq);
  return p;
}

SrBinding bind_sr(Tape& tape, const SrGeneratorParams& p, bool trainable) {
  auto make = [&](const Eigen::ArrayXd& v, std::vector<int> shape) {
    return trainable ? tape.variable(std::move(shape), v) : tape.constant(std::move(shape), v);
  };
  const int d = p.noise_channels, w = p.width;
  SrBinding b;
  b.k1 = make(p.k1, {3, 3, d, w});
  b.kb1 = make(p.kb1, {w});
  b.k2 = make(p.k2, {3, 3, w, w});
  b.kb2 = make(p.kb2, {w});
  b.k3 = make(p.k3, {3, 3, w, p.endmembers});
  b.kb3 = make(p.kb3, {p.endmembers});
  b.wk1 = make(p.wk1, {kKernelNoiseLen, kKernelHidden});
  b.bk1 = make(p.bk1, {kKernelHidden});
  b.wk2 = make(p.wk2, {kKernelHidden, p.kernel_size * p.kernel_size});
  b.bk2 = make(p.bk2, {p.kernel_size * p.kernel_size});
  return b;
}

Tensor hr_abundance_graph(const Tensor& l_y_hwc, const SrBinding& gen) {
  if (l_y_hwc.rank() != 3 || l_y_hwc.dim(2) != gen.k1.dim(2)) {
    throw DimensionError("hr_abundance_graph: noise channel count does not match generator");
  }
  Tensor h1 = softplus(conv2d(l_y_hwc, gen.k1, gen.kb1));
  Tensor h2 = softplus(conv2d(h1, gen.k2, gen.kb2));
  return softplus(conv2d(h2, gen.k3, gen.kb3));
}

Tensor kernel_graph(const Tensor& l_k, const SrBinding& gen, int kernel_size) {
  Tensor row = reshape(l_k, {1, static_cast<int>(l_k.size())});
  Tensor h = softplus(add_rowwise(matmul(row, gen.wk1), gen.bk1));
  Tensor logits = add_rowwise(matmul(h, gen.wk2), gen.bk2);
  return reshape(softmax_over_all(logits), {kernel_size, kernel_size});
}

Tensor l2_graph(const Tensor& y_hwc, const Tensor& hr_abundance, const Tensor& theta_e,
                const Tensor& kernel, int stride, bool raw) {
  const int hr_h = hr_abundance.dim(0), hr_w = hr_abundance.dim(1), p = hr_abundance.dim(2);
  const int channels = theta_e.dim(1);
  Tensor hr_mat = reshape(hr_abundance, {hr_h * hr_w, p});
  Tensor hr_cube = reshape(decode_graph(hr_mat, theta_e), {hr_h, hr_w, channels});
  Tensor y2 = conv2d_stride(hr_cube, kernel, stride);
  if (y2.shape() != y_hwc.shape()) {
    throw DimensionError("l2_graph: downsampled reconstruction does not match the observed cube");
  }
  Tensor sq = square(sub(y_hwc, y2));
  return raw ? sum(sq) : mean(sq);
}

AbundanceMap generate_hr_abundance(const NoiseInputs& noise, const SrGeneratorParams& params) {
  Tape tape;
  Tensor l_y = tape.constant({noise.height, noise.width, noise.channels}, noise.l_y);
  SrBinding gen = bind_sr(tape, params, false);
  Tensor a = hr_abundance_graph(l_y, gen);
  return AbundanceMap(noise.height, noise.width, params.endmembers, a.values());
}

Eigen::MatrixXd generate_kernel(const NoiseInputs& noise, const SrGeneratorParams& params) {
  Tape tape;
  Tensor l_k = tape.constant({static_cast<int>(noise.l_k.size())}, noise.l_k);
  SrBinding gen = bind_sr(tape, params, false);
  Tensor k = kernel_graph(l_k, gen, params.kernel_size);
  const int ks = params.kernel_size;
  Eigen::MatrixXd out(ks, ks);
  for (int u = 0; u < ks; ++u) {
    for (int v = 0; v < ks; ++v) out(u, v) = k.values()[static_cast<Eigen::Index>(u) * ks + v];
  }
  return out;
}

HsiCube downsample(const HsiCube& hr, const Eigen::MatrixXd& kernel, int stride) {
  if (stride < 1) throw ConfigError("downsample: stride must be >= 1");
  if (hr.height % stride != 0 || hr.width % stride != 0) {
    throw DimensionError("downsample: HR dims must be divisible by the stride");
  }
  if (kernel.rows() != kernel.cols()) throw DimensionError("downsample: kernel must be square");
  Tape tape;
  Tensor in = tape.constant({hr.height, hr.width, hr.channels}, hr.values);
  Eigen::ArrayXd kflat(kernel.size());
  for (int u = 0; u < kernel.rows(); ++u) {
    for (int v = 0; v < kernel.cols(); ++v) kflat[u * kernel.cols() + v] = kernel(u, v);
  }
  Tensor k = tape.constant({static_cast<int>(kernel.rows()), static_cast<int>(kernel.cols())},
                           std::move(kflat));
  Tensor out = conv2d_stride(in, k, stride);
  return HsiCube(hr.height / stride, hr.width / stride, hr.channels, out.values());
}

double loss_l2(const HsiCube& y, const NoiseInputs& noise, const SrGeneratorParams& params,
               const SharedDecoderParams& decoder, const SrConfig& cfg, bool raw) {
  cfg.validate();
  if (noise.height != y.height * cfg.scale || noise.width != y.width * cfg.scale) {
    throw DimensionError("loss_l2: noise tensor dims do not match scale × cube dims");
  }
  Tape tape;
  Tensor y_hwc = tape.constant({y.height, y.width, y.channels}, y.values);
  Tensor l_y = tape.constant({noise.height, noise.width, noise.channels}, noise.l_y);
  Tensor l_k = tape.constant({static_cast<int>(noise.l_k.size())}, noise.l_k);
  SrBinding gen = bind_sr(tape, params, false);
  Tensor theta = bind_decoder(tape, decoder, false);
  Tensor hr = hr_abundance_graph(l_y, gen);
  Tensor kernel = kernel_graph(l_k, gen, params.kernel_size);
  return l2_graph(y_hwc, hr, theta, kernel, cfg.scale, raw).value();
}

}  // namespace smile

#include "smile/unmix_branch.hpp"

#include <cmath>

#include "smile/errors.hpp"

namespace smile {

namespace {

Eigen::ArrayXd he_uniform(Eigen::Index count, int fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::ArrayXd out(count);
  for (Eigen::Index i = 0; i < count; ++i) out[i] = dist(rng);
  return out;
}

}  // namespace

UnmixEncoderParams UnmixEncoderParams::random(int channels, int hidden, int endmembers,
                                              std::mt19937_64& rng) {
  if (channels <= 0 || hidden <= 0 || endmembers <= 0) {
    throw ConfigError("UnmixEncoderParams: extents must be positive");
  }
  UnmixEncoderParams p;
  p.channels = channels;
  p.hidden = hidden;
  p.endmembers = endmembers;
  p.w1 = he_uniform(static_cast<Eigen::Index>(channels) * hidden, channels, rng);
  p.b1 = Eigen::ArrayXd::Zero(hidden);
  p.w2 = he_uniform(static_cast<Eigen::Index>(hidden) * hidden, hidden, rng);
  p.b2 = Eigen::ArrayXd::Zero(hidden);
  p.w3 = he_uniform(static_cast<Eigen::Index>(hidden) * endmembers, hidden, rng);
  p.b3 = Eigen::ArrayXd::Zero(endmembers);
  return p;
}

SharedDecoderParams::SharedDecoderParams(const EndmemberMatrix& e)
    : endmembers(e.count()), channels(e.channels()), theta_e(e.count() * e.channels()) {
  for (int i = 0; i < endmembers; ++i) {
    for (int j = 0; j < channels; ++j) {
      theta_e[static_cast<Eigen::Index>(i) * channels + j] = e.values(i, j);
    }
  }
}

EndmemberMatrix SharedDecoderParams::as_endmembers() const {
  EndmemberMatrix e(endmembers, channels);
  for (int i = 0; i < endmembers; ++i) {
    for (int j = 0; j < channels; ++j) {
      e.values(i, j) = theta_e[static_cast<Eigen::Index>(i) * channels + j];
    }
  }
  return e;
}

UnmixBinding bind_unmix(Tape& tape, const UnmixEncoderParams& p, bool trainable) {
  auto make = [&](const Eigen::ArrayXd& v, std::vector<int> shape) {
    return trainable ? tape.variable(std::move(shape), v) : tape.constant(std::move(shape), v);
  };
  UnmixBinding b;
  b.w1 = make(p.w1, {p.channels, p.hidden});
  b.b1 = make(p.b1, {p.hidden});
  b.w2 = make(p.w2, {p.hidden, p.hidden});
  b.b2 = make(p.b2, {p.hidden});
  b.w3 = make(p.w3, {p.hidden, p.endmembers});
  b.b3 = make(p.b3, {p.endmembers});
  return b;
}

Tensor bind_decoder(Tape& tape, const SharedDecoderParams& decoder, bool trainable) {
  std::vector<int> shape{decoder.endmembers, decoder.channels};
  return trainable ? tape.variable(std::move(shape), decoder.theta_e)
                   : tape.constant(std::move(shape), decoder.theta_e);
}

Tensor abundance_graph(const Tensor& y_nc, const UnmixBinding& enc) {
  if (y_nc.rank() != 2 || y_nc.dim(1) != enc.w1.dim(0)) {
    throw DimensionError("abundance_graph: input channel count does not match encoder");
  }
  Tensor h1 = softplus(add_rowwise(matmul(y_nc, enc.w1), enc.b1));
  Tensor h2 = softplus(add_rowwise(matmul(h1, enc.w2), enc.b2));
  return softplus(add_rowwise(matmul(h2, enc.w3), enc.b3));
}

Tensor decode_graph(const Tensor& a_np, const Tensor& theta_e) {
  if (a_np.dim(1) != theta_e.dim(0)) {
    throw DimensionError("decode_graph: abundance p does not match decoder");
  }
  return matmul(a_np, theta_e);
}

Tensor l1_graph(const Tensor& y_nc, const Tensor& reconstruction_nc, bool raw) {
  Tensor sq = square(sub(y_nc, reconstruction_nc));
  return raw ? sum(sq) : mean(sq);
}

Tensor l3_graph(const Tensor& a_np, bool raw) {
  Tensor nn = nuclear_norm(a_np);
  if (raw) return nn;
  const double denom = std::sqrt(static_cast<double>(a_np.dim(0)) * a_np.dim(1));
  return scale(nn, 1.0 / denom);
}

Tensor l4_graph(const Tensor& a_np, bool raw) {
  Tensor deviation = abs_value(add_scalar(scale(row_sums(a_np), -1.0), 1.0));
  return raw ? sum(deviation) : mean(deviation);
}

AbundanceMap encode_abundance(const HsiCube& y, const UnmixEncoderParams& params) {
  if (y.channels != params.channels) {
    throw DimensionError("encode_abundance: cube channels do not match encoder input width");
  }
  Tape tape;
  Tensor y_nc = tape.constant({y.pixels(), y.channels}, y.values);
  UnmixBinding enc = bind_unmix(tape, params, false);
  Tensor a = abundance_graph(y_nc, enc);
  return AbundanceMap(y.height, y.width, params.endmembers, a.values());
}

HsiCube decode(const AbundanceMap& a, const SharedDecoderParams& decoder) {
  if (a.count != decoder.endmembers) {
    throw DimensionError("decode: abundance p does not match decoder");
  }
  Tape tape;
  Tensor a_np = tape.constant({a.pixels(), a.count}, a.values);
  Tensor theta = bind_decoder(tape, decoder, false);
  Tensor y = decode_graph(a_np, theta);
  return HsiCube(a.height, a.width, decoder.channels, y.values());
}

double loss_l1(const HsiCube& y, const UnmixEncoderParams& params,
               const SharedDecoderParams& decoder, bool raw) {
  Tape tape;
  Tensor y_nc = tape.constant({y.pixels(), y.channels}, y.values);
  UnmixBinding enc = bind_unmix(tape, params, false);
  Tensor theta = bind_decoder(tape, decoder, false);
  Tensor a = abundance_graph(y_nc, enc);
  return l1_graph(y_nc, decode_graph(a, theta), raw).value();
}

double loss_l3_nuclear(const AbundanceMap& a, bool raw) {
  Tape tape;
  Tensor a_np = tape.constant({a.pixels(), a.count}, a.values);
  return l3_graph(a_np, raw).value();
}

double loss_l4_asc(const AbundanceMap& a, bool raw) {
  Tape tape;
  Tensor a_np = tape.constant({a.pixels(), a.count}, a.values);
  return l4_graph(a_np, raw).value();
}

}  // namespace smile

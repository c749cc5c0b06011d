#pragma once

#include <random>

#include "smile/lmm.hpp"
#include "smile/ops.hpp"

namespace smile {

/// Pixelwise encoder g_A1: MLP C → h → h → p, softplus throughout. The
/// softplus head makes the abundance nonnegativity constraint structural.
/// Weight matrices are stored flat, row-major (input × output).
struct UnmixEncoderParams {
  int channels = 0;
  int hidden = 0;
  int endmembers = 0;
  Eigen::ArrayXd w1, b1, w2, b2, w3, b3;

  static UnmixEncoderParams random(int channels, int hidden, int endmembers,
                                   std::mt19937_64& rng);
  long parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
  }
};

/// Shared linear decoder g_E: a single bias-free map p → C whose weight matrix
/// is the endmember estimate. Both branches reference the same object.
struct SharedDecoderParams {
  int endmembers = 0;
  int channels = 0;
  Eigen::ArrayXd theta_e;  // p×C row-major

  SharedDecoderParams() = default;
  explicit SharedDecoderParams(const EndmemberMatrix& e);
  EndmemberMatrix as_endmembers() const;
};

/// Taped handles for the encoder weights.
struct UnmixBinding {
  Tensor w1, b1, w2, b2, w3, b3;
};

UnmixBinding bind_unmix(Tape& tape, const UnmixEncoderParams& params, bool trainable);
Tensor bind_decoder(Tape& tape, const SharedDecoderParams& decoder, bool trainable);

/// N×p abundance graph from an N×C input.
Tensor abundance_graph(const Tensor& y_nc, const UnmixBinding& enc);
/// N×C reconstruction graph.
Tensor decode_graph(const Tensor& a_np, const Tensor& theta_e);
/// Branch reconstruction loss; mean over N·C unless `raw`.
Tensor l1_graph(const Tensor& y_nc, const Tensor& reconstruction_nc, bool raw = false);
/// Nuclear norm of the N×p abundance, normalized by √(N·p) unless `raw`.
Tensor l3_graph(const Tensor& a_np, bool raw = false);
/// Sum-to-one penalty Σ_pixels |1 − Σ_j a_j|, normalized by N unless `raw`.
Tensor l4_graph(const Tensor& a_np, bool raw = false);

AbundanceMap encode_abundance(const HsiCube& y, const UnmixEncoderParams& params);
HsiCube decode(const AbundanceMap& a, const SharedDecoderParams& decoder);
double loss_l1(const HsiCube& y, const UnmixEncoderParams& params,
               const SharedDecoderParams& decoder, bool raw = false);
double loss_l3_nuclear(const AbundanceMap& a, bool raw = false);
double loss_l4_asc(const AbundanceMap& a, bool raw = false);

}  // namespace smile

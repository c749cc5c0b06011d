#pragma once

#include <random>

#include "smile/lmm.hpp"
#include "smile/ops.hpp"
#include "smile/unmix_branch.hpp"

namespace smile {

struct SrConfig {
  int scale = 2;          // HR dims = scale × observed dims
  int kernel_size = 5;    // learned downsampling kernel, odd
  int noise_channels = 8; // channels of the frozen noise tensor l_Y
  int width = 32;         // conv feature width of g_A2

  void validate() const;  // throws ConfigError
};

/// Frozen Gaussian noise inputs: l_Y feeds g_A2, l_k feeds g_k. Drawn once at
/// initialization, never resampled.
struct NoiseInputs {
  int height = 0;  // HR spatial dims
  int width = 0;
  int channels = 0;
  Eigen::ArrayXd l_y;  // height×width×channels
  Eigen::ArrayXd l_k;  // length 64

  static NoiseInputs sample(int lr_height, int lr_width, const SrConfig& cfg,
                            std::mt19937_64& rng);
};

/// g_A2: three 3×3 convs d → width → width → p with softplus activations
/// (softplus head keeps the HR abundance positive). g_k: MLP 64 → 64 → k²
/// with a softplus hidden layer; a global softmax turns the output into a
/// nonnegative unit-mass k×k kernel.
struct SrGeneratorParams {
  int noise_channels = 0;
  int width = 0;
  int endmembers = 0;
  int kernel_size = 0;
  Eigen::ArrayXd k1, kb1, k2, kb2, k3, kb3;  // conv kernels k×k×cin×cout and biases
  Eigen::ArrayXd wk1, bk1, wk2, bk2;         // kernel generator MLP

  static SrGeneratorParams random(const SrConfig& cfg, int endmembers, std::mt19937_64& rng);
  long parameter_count() const {
    return k1.size() + kb1.size() + k2.size() + kb2.size() + k3.size() + kb3.size() +
           wk1.size() + bk1.size() + wk2.size() + bk2.size();
  }
};

struct SrBinding {
  Tensor k1, kb1, k2, kb2, k3, kb3;
  Tensor wk1, bk1, wk2, bk2;
};

SrBinding bind_sr(Tape& tape, const SrGeneratorParams& params, bool trainable);

/// HR abundance graph: (sH)×(sW)×p from the frozen noise tensor.
Tensor hr_abundance_graph(const Tensor& l_y_hwc, const SrBinding& gen);
/// k×k downsampling kernel graph (softmax over all entries).
Tensor kernel_graph(const Tensor& l_k, const SrBinding& gen, int kernel_size);
/// Full SR branch loss: mean ‖Y − downsample(decode(Â_HR, θ_E), K̂, s)‖².
Tensor l2_graph(const Tensor& y_hwc, const Tensor& hr_abundance, const Tensor& theta_e,
                const Tensor& kernel, int stride, bool raw = false);

AbundanceMap generate_hr_abundance(const NoiseInputs& noise, const SrGeneratorParams& params);
Eigen::MatrixXd generate_kernel(const NoiseInputs& noise, const SrGeneratorParams& params);
/// Channel-shared convolution + stride subsampling; HR dims must divide by s.
HsiCube downsample(const HsiCube& hr, const Eigen::MatrixXd& kernel, int stride);
double loss_l2(const HsiCube& y, const NoiseInputs& noise, const SrGeneratorParams& params,
               const SharedDecoderParams& decoder, const SrConfig& cfg, bool raw = false);

}  // namespace smile

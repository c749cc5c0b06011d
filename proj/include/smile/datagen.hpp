#pragma once

#include <cstdint>
#include <string>

#include "smile/lmm.hpp"

namespace smile {

struct DatasetSpec {
  int height = 64;
  int width = 64;
  int channels = 224;
  int endmembers = 5;
  double snr_db = 30.0;  // +infinity disables noise
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
  bool pure_pixel_injection = false;

  /// 64×64, C=224 synthetic preset (p and SNR stay caller-chosen).
  static DatasetSpec dataset1();
  /// 100×100, p=4, 30 dB preset.
  static DatasetSpec dataset2();

  void validate() const;  // throws ConfigError
};

struct Dataset {
  HsiCube cube;
  AbundanceMap truth_abundance;
  EndmemberMatrix truth_endmembers;
  HsiCube clean;  // noiseless mix, kept for realized-SNR reporting
};

/// Per-pixel i.i.d. Dirichlet(alpha·1_p) rows; with injection on, p evenly
/// spaced pixels are overwritten with the p one-hot vectors.
AbundanceMap sample_dirichlet_abundance(const DatasetSpec& spec);

/// p smooth spectra in [0,1]^C: each a peak-normalized sum of 3–6 Gaussian
/// bumps over the band axis, resampled until all pairwise spectral angles are
/// >= 10°. Throws DataError after 1000 failed resamples for one spectrum.
EndmemberMatrix generate_endmembers(const DatasetSpec& spec);

/// CSV loader: one endmember per row, C comma-separated reflectances, lines
/// starting with '#' skipped.
EndmemberMatrix load_endmember_library(const std::string& path);

/// Adds i.i.d. zero-mean Gaussian noise with variance mean(Y²)/10^(snr/10).
/// An infinite snr_db returns the input bit-for-bit. Throws ContractError on
/// a zero-energy cube.
HsiCube add_noise_to_snr(const HsiCube& clean, double snr_db, std::uint64_t seed);

Dataset build_dataset(const DatasetSpec& spec);

}  // namespace smile

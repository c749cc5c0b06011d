#include "smile/datagen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "smile/errors.hpp"
#include "smile/metrics.hpp"
#include "smile/rng.hpp"

namespace smile {

DatasetSpec DatasetSpec::dataset1() {
  DatasetSpec s;
  s.height = 64;
  s.width = 64;
  s.channels = 224;
  return s;
}

DatasetSpec DatasetSpec::dataset2() {
  DatasetSpec s;
  s.height = 100;
  s.width = 100;
  s.channels = 224;
  s.endmembers = 4;
  s.snr_db = 30.0;
  return s;
}

void DatasetSpec::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0 || endmembers <= 0) {
    throw ConfigError("DatasetSpec: extents must be positive");
  }
  if (endmembers > channels) throw ConfigError("DatasetSpec: p must not exceed channel count");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("DatasetSpec: dirichlet_alpha must be > 0");
}

AbundanceMap sample_dirichlet_abundance(const DatasetSpec& spec) {
  spec.validate();
  const int n = spec.height * spec.width;
  const int p = spec.endmembers;
  auto rng = make_rng(spec.seed, RngStream::Abundance);
  std::gamma_distribution<double> gamma(spec.dirichlet_alpha, 1.0);

  AbundanceMap map(spec.height, spec.width, p);
  std::vector<double> draw(static_cast<std::size_t>(p));
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < p; ++j) {
      double g = gamma(rng);
      // A zero gamma draw (possible for tiny alpha) would break normalization.
      if (g <= 0.0) g = 1e-300;
      draw[static_cast<std::size_t>(j)] = g;
      total += g;
    }
    for (int j = 0; j < p; ++j) {
      map.values[static_cast<Eigen::Index>(i) * p + j] = draw[static_cast<std::size_t>(j)] / total;
    }
  }
  if (spec.pure_pixel_injection) {
    const int stride = n / p;
    for (int j = 0; j < p; ++j) {
      const int pix = j * stride;
      for (int jj = 0; jj < p; ++jj) {
        map.values[static_cast<Eigen::Index>(pix) * p + jj] = (jj == j) ? 1.0 : 0.0;
      }
    }
  }
  return map;
}

namespace {

Eigen::VectorXd sample_bump_spectrum(int channels, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bump_count(3, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double c = static_cast<double>(channels);
  // Width floor keeps band-to-band steps small (<= 0.15 after normalization).
  const double sigma_lo = std::max(1.0, c / 28.0);
  const double sigma_hi = std::max(2.0, c / 8.0);

  Eigen::VectorXd spectrum = Eigen::VectorXd::Zero(channels);
  const int bumps = bump_count(rng);
  for (int b = 0; b < bumps; ++b) {
    const double amp = 0.3 + 0.7 * unit(rng);
    const double center = unit(rng) * (c - 1.0);
    const double sigma = sigma_lo + (sigma_hi - sigma_lo) * unit(rng);
    for (int i = 0; i < channels; ++i) {
      const double z = (static_cast<double>(i) - center) / sigma;
      spectrum[i] += amp * std::exp(-0.5 * z * z);
    }
  }
  const double peak = spectrum.maxCoeff();
  const double level = 0.6 + 0.35 * unit(rng);
  return spectrum * (level / peak);
}

}  // namespace

EndmemberMatrix generate_endmembers(const DatasetSpec& spec) {
  spec.validate();
  constexpr double kMinSeparationDeg = 10.0;
  auto rng = make_rng(spec.seed, RngStream::Endmembers);

  EndmemberMatrix result(spec.endmembers, spec.channels);
  for (int j = 0; j < spec.endmembers; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Eigen::VectorXd candidate = sample_bump_spectrum(spec.channels, rng);
      placed = true;
      for (int prev = 0; prev < j; ++prev) {
        if (sad(result.values.row(prev), candidate.transpose()) < kMinSeparationDeg) {
          placed = false;
          break;
        }
      }
      if (placed) result.values.row(j) = candidate.transpose();
    }
    if (!placed) {
      throw DataError("generate_endmembers: could not reach 10 deg pairwise separation after "
                      "1000 resamples");
    }
  }
  return result;
}

EndmemberMatrix load_endmember_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_endmember_library: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError("load_endmember_library: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("load_endmember_library: no data rows in " + path);
  EndmemberMatrix result(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      result.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return result;
}

HsiCube add_noise_to_snr(const HsiCube& clean, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db)) return clean;
  const double mean_sq = clean.values.square().mean();
  if (mean_sq <= 0.0) throw ContractError("add_noise_to_snr: cube has zero energy");
  const double sigma = std::sqrt(mean_sq / std::pow(10.0, snr_db / 10.0));

  auto rng = make_rng(seed, RngStream::Noise);
  std::normal_distribution<double> normal(0.0, sigma);
  HsiCube noisy = clean;
  for (Eigen::Index i = 0; i < noisy.values.size(); ++i) noisy.values[i] += normal(rng);
  return noisy;
}

Dataset build_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.truth_abundance = sample_dirichlet_abundance(spec);
  ds.truth_endmembers = generate_endmembers(spec);
  ds.clean = mix(ds.truth_abundance, ds.truth_endmembers);
  ds.cube = add_noise_to_snr(ds.clean, spec.snr_db, spec.seed);
  return ds;
}

}  // namespace smile

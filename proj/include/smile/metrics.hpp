#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "smile/errors.hpp"
#include "smile/lmm.hpp"

namespace smile {

inline constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

/// Spectral angle between two spectra, in degrees. Scale-invariant and
/// symmetric; throws NumericError on a zero vector.
template <class DerivedA, class DerivedB>
double sad(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw DimensionError("sad: vector lengths differ");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericError("sad: spectral angle of a zero vector");
  double dot = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) dot += a(i) * b(i);
  const double c = std::clamp(dot / (na * nb), -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

struct SadSummary {
  double mean_deg = 0.0;
  std::vector<double> per_endmember_deg;
};

/// Per-endmember angles and their mean; rows are assumed already aligned.
SadSummary sad_mean(const EndmemberMatrix& est, const EndmemberMatrix& truth);

/// Minimum-total-SAD assignment between estimated and true endmembers.
/// perm[i] is the estimated row matched to truth row i.
std::vector<int> align_permutation(const EndmemberMatrix& est, const EndmemberMatrix& truth);

/// Optimal assignment for an arbitrary square cost matrix (Hungarian method);
/// result[i] is the column assigned to row i.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

EndmemberMatrix reorder_endmembers(const EndmemberMatrix& est, const std::vector<int>& perm);
AbundanceMap reorder_channels(const AbundanceMap& est, const std::vector<int>& perm);

/// √(Σ_i ‖a_i − â_i‖² / N) over the N pixels (division by N only, not N·p).
double rmse(const AbundanceMap& est, const AbundanceMap& truth);

struct AadResult {
  double degrees = 0.0;
  int excluded_pixels = 0;  // pixels with a zero abundance vector on either side
};

AadResult aad_detail(const AbundanceMap& est, const AbundanceMap& truth);
/// Mean over pixels of the angle between true and estimated abundance vectors.
double aad(const AbundanceMap& est, const AbundanceMap& truth);

/// 10·log10(‖clean‖² / ‖noisy − clean‖²); +infinity when the cubes agree.
double snr_realized(const HsiCube& clean, const HsiCube& noisy);

struct MetricsReport {
  double rmse = 0.0;
  double aad_deg = 0.0;
  double sad_mean_deg = 0.0;
  std::vector<double> sad_per_endmember_deg;
  std::vector<int> permutation;
  int aad_excluded_pixels = 0;
  std::optional<double> snr_realized_db;
};

/// Aligns the estimates to the truth, then computes every metric.
MetricsReport evaluate(const AbundanceMap& est_abundance, const EndmemberMatrix& est_endmembers,
                       const AbundanceMap& truth_abundance,
                       const EndmemberMatrix& truth_endmembers);

/// Flat JSON key-value serialization.
std::string to_json_string(const MetricsReport& report);

}  // namespace smile

#pragma once

#include <Eigen/Core>
#include <optional>

namespace smile {

/// H×W×C reflectance cube, pixel-major (band-interleaved-by-pixel): value
/// (y, x, c) lives at ((y·W + x)·C + c). Immutable by convention once built.
struct HsiCube {
  int height = 0;
  int width = 0;
  int channels = 0;
  Eigen::ArrayXd values;

  HsiCube() = default;
  HsiCube(int h, int w, int c);
  HsiCube(int h, int w, int c, Eigen::ArrayXd v);

  int pixels() const { return height * width; }
  double operator()(int y, int x, int c) const {
    return values[(static_cast<Eigen::Index>(y) * width + x) * channels + c];
  }
  double& at(int y, int x, int c) {
    return values[(static_cast<Eigen::Index>(y) * width + x) * channels + c];
  }
  /// N×C row-major view.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  as_matrix() const {
    return {values.data(), pixels(), channels};
  }
};

/// p×C endmember spectra; also the shared decoder weight matrix.
struct EndmemberMatrix {
  Eigen::MatrixXd values;  // p×C

  EndmemberMatrix() = default;
  explicit EndmemberMatrix(Eigen::MatrixXd v) : values(std::move(v)) {}
  EndmemberMatrix(int p, int channels) : values(Eigen::MatrixXd::Zero(p, channels)) {}

  int count() const { return static_cast<int>(values.rows()); }
  int channels() const { return static_cast<int>(values.cols()); }
};

/// H×W×p per-pixel fractions, same pixel-major layout as HsiCube.
struct AbundanceMap {
  int height = 0;
  int width = 0;
  int count = 0;  // p
  Eigen::ArrayXd values;

  AbundanceMap() = default;
  AbundanceMap(int h, int w, int p);
  AbundanceMap(int h, int w, int p, Eigen::ArrayXd v);

  int pixels() const { return height * width; }
  double operator()(int y, int x, int j) const {
    return values[(static_cast<Eigen::Index>(y) * width + x) * count + j];
  }
  double& at(int y, int x, int j) {
    return values[(static_cast<Eigen::Index>(y) * width + x) * count + j];
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  as_matrix() const {
    return {values.data(), pixels(), count};
  }
};

/// Y = A·E (+ N). Throws DimensionError on p or shape mismatch.
HsiCube mix(const AbundanceMap& abundance, const EndmemberMatrix& endmembers,
            const std::optional<HsiCube>& noise = std::nullopt);

/// Mean squared reconstruction error ‖Y − A·E‖² / (N·C).
double reconstruction_error(const HsiCube& y, const AbundanceMap& a, const EndmemberMatrix& e);

struct ConstraintReport {
  double min_value = 0.0;          // ANC diagnostic
  double max_sum_deviation = 0.0;  // ASC diagnostic: max |row-sum − 1|
};

ConstraintReport constraint_report(const AbundanceMap& a);

}  // namespace smile

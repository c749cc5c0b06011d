#include "smile/lmm.hpp"

#include <cmath>

#include "smile/errors.hpp"
#include "smile/ops.hpp"

namespace smile {

namespace {

void require_finite(const Eigen::ArrayXd& v, const char* what) {
  if (!v.isFinite().all()) throw ContractError(std::string(what) + ": non-finite values");
}

}  // namespace

HsiCube::HsiCube(int h, int w, int c)
    : height(h), width(w), channels(c),
      values(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(h) * w * c)) {
  if (h <= 0 || w <= 0 || c < 2) throw DimensionError("HsiCube: need H,W >= 1 and C >= 2");
}

HsiCube::HsiCube(int h, int w, int c, Eigen::ArrayXd v)
    : height(h), width(w), channels(c), values(std::move(v)) {
  if (h <= 0 || w <= 0 || c < 2) throw DimensionError("HsiCube: need H,W >= 1 and C >= 2");
  if (values.size() != static_cast<Eigen::Index>(h) * w * c) {
    throw DimensionError("HsiCube: value count does not match H*W*C");
  }
  require_finite(values, "HsiCube");
}

AbundanceMap::AbundanceMap(int h, int w, int p)
    : height(h), width(w), count(p),
      values(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(h) * w * p)) {
  if (h <= 0 || w <= 0 || p <= 0) throw DimensionError("AbundanceMap: extents must be positive");
}

AbundanceMap::AbundanceMap(int h, int w, int p, Eigen::ArrayXd v)
    : height(h), width(w), count(p), values(std::move(v)) {
  if (h <= 0 || w <= 0 || p <= 0) throw DimensionError("AbundanceMap: extents must be positive");
  if (values.size() != static_cast<Eigen::Index>(h) * w * p) {
    throw DimensionError("AbundanceMap: value count does not match H*W*p");
  }
  require_finite(values, "AbundanceMap");
}

HsiCube mix(const AbundanceMap& abundance, const EndmemberMatrix& endmembers,
            const std::optional<HsiCube>& noise) {
  if (abundance.count != endmembers.count()) {
    throw DimensionError("mix: abundance p does not match endmember count");
  }
  const int n = abundance.pixels();
  const int p = abundance.count;
  const int c = endmembers.channels();
  if (noise && (noise->height != abundance.height || noise->width != abundance.width ||
                noise->channels != c)) {
    throw DimensionError("mix: noise cube shape mismatch");
  }
  // Row-major decoder weights so this is bit-identical to the taped decode path.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> e_rm = endmembers.values;
  Eigen::ArrayXd out(static_cast<Eigen::Index>(n) * c);
  detail::gemm_rm(abundance.values.data(), e_rm.data(), out.data(), n, p, c);
  if (noise) out += noise->values;
  return HsiCube(abundance.height, abundance.width, c, std::move(out));
}

double reconstruction_error(const HsiCube& y, const AbundanceMap& a, const EndmemberMatrix& e) {
  if (y.height != a.height || y.width != a.width) {
    throw DimensionError("reconstruction_error: cube and abundance dims differ");
  }
  if (y.channels != e.channels()) {
    throw DimensionError("reconstruction_error: channel count mismatch");
  }
  HsiCube recon = mix(a, e);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.values.size(); ++i) {
    const double d = y.values[i] - recon.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.values.size());
}

ConstraintReport constraint_report(const AbundanceMap& a) {
  ConstraintReport rep;
  rep.min_value = a.values.minCoeff();
  double worst = 0.0;
  const int n = a.pixels();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.count; ++j) s += a.values[static_cast<Eigen::Index>(i) * a.count + j];
    worst = std::max(worst, std::abs(1.0 - s));
  }
  rep.max_sum_deviation = worst;
  return rep;
}

}  // namespace smile

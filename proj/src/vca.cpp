#include "smile/vca.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "smile/errors.hpp"
#include "smile/rng.hpp"

namespace smile {

namespace {

// Columns of the returned matrix are the top-d eigenvectors (descending
// eigenvalue) of the symmetric matrix `m`.
Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& m, int d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError("vca_extract: eigendecomposition failed");
  const int c = static_cast<int>(m.rows());
  Eigen::MatrixXd out(c, d);
  for (int j = 0; j < d; ++j) out.col(j) = es.eigenvectors().col(c - 1 - j);
  return out;
}

int numerical_rank(const Eigen::MatrixXd& scatter) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
  Eigen::VectorXd sigma = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const double tol = sigma.maxCoeff() * 1e-6;
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > tol) ++rank;
  }
  return rank;
}

}  // namespace

EndmemberMatrix vca_extract(const HsiCube& cube, int p, std::uint64_t seed) {
  const int n = cube.pixels();
  const int c = cube.channels;
  if (p < 1 || p > std::min(c, n)) {
    throw ConfigError("vca_extract: need 1 <= p <= min(C, N)");
  }

  // Spectra as columns: R is C×N.
  Eigen::MatrixXd r(c, n);
  for (int i = 0; i < n; ++i) {
    r.col(i) = Eigen::Map<const Eigen::VectorXd>(cube.values.data() + static_cast<Eigen::Index>(i) * c, c);
  }

  const Eigen::MatrixXd scatter = r * r.transpose();
  const int rank = numerical_rank(scatter);
  if (rank < p) {
    throw DataError("vca_extract: data rank " + std::to_string(rank) +
                    " is below the requested p = " + std::to_string(p));
  }

  auto pick_rows = [&](const std::vector<int>& indices) {
    EndmemberMatrix result(p, c);
    for (int i = 0; i < p; ++i) {
      result.values.row(i) =
          Eigen::Map<const Eigen::VectorXd>(cube.values.data() + static_cast<Eigen::Index>(indices[static_cast<std::size_t>(i)]) * c, c)
              .transpose();
    }
    return result;
  };

  if (p == 1) {
    const Eigen::MatrixXd u1 = top_eigenvectors(scatter, 1);
    Eigen::VectorXd proj = (u1.transpose() * r).transpose();
    int best = 0;
    proj.cwiseAbs().maxCoeff(&best);
    return pick_rows({best});
  }

  // Classical SNR estimate on the p-dimensional PCA projection.
  const Eigen::VectorXd r_mean = r.rowwise().mean();
  const Eigen::MatrixXd r0 = r.colwise() - r_mean;
  const Eigen::MatrixXd cov = r0 * r0.transpose() / static_cast<double>(n);
  const Eigen::MatrixXd ud_p = top_eigenvectors(cov, p);
  const Eigen::MatrixXd xp = ud_p.transpose() * r0;

  const double p_y = r.squaredNorm() / static_cast<double>(n);
  const double p_x = xp.squaredNorm() / static_cast<double>(n) + r_mean.squaredNorm();
  double snr_db;
  if (p_y - p_x <= 1e-12 * p_y) {
    snr_db = std::numeric_limits<double>::infinity();
  } else {
    const double num = p_x - (static_cast<double>(p) / c) * p_y;
    snr_db = num <= 0.0 ? -std::numeric_limits<double>::infinity()
                        : 10.0 * std::log10(num / (p_y - p_x));
  }
  const double snr_threshold_db = 15.0 + 10.0 * std::log10(static_cast<double>(p));

  Eigen::MatrixXd y;  // p×N working set whose convex hull is scanned for vertices
  if (snr_db > snr_threshold_db) {
    // Projective projection onto the top-p subspace of the raw scatter.
    const Eigen::MatrixXd ud = top_eigenvectors(scatter / static_cast<double>(n), p);
    Eigen::MatrixXd x = ud.transpose() * r;
    const Eigen::VectorXd u = x.rowwise().mean();
    y.resize(p, n);
    for (int i = 0; i < n; ++i) {
      double denom = x.col(i).dot(u);
      if (std::abs(denom) < 1e-12) denom = denom < 0.0 ? -1e-12 : 1e-12;
      y.col(i) = x.col(i) / denom;
    }
  } else {
    // Affine projection: mean-removed top-(p−1) subspace plus a constant row.
    const int d = p - 1;
    const Eigen::MatrixXd ud = top_eigenvectors(cov, d);
    const Eigen::MatrixXd x = ud.transpose() * r0;
    const double scale = x.colwise().norm().maxCoeff();
    y.resize(p, n);
    y.topRows(d) = x;
    y.row(p - 1).setConstant(scale);
  }

  auto rng = make_rng(seed, RngStream::Vca);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  a(p - 1, 0) = 1.0;
  std::vector<int> indices(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd f;
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd w(p);
      for (int j = 0; j < p; ++j) w[j] = normal(rng);
      const Eigen::MatrixXd pinv =
          a.completeOrthogonalDecomposition().pseudoInverse();
      f = w - a * (pinv * w);
      const double norm = f.norm();
      if (norm > 1e-12) {
        f /= norm;
        break;
      }
      f.setZero();
    }
    if (f.size() == 0 || f.isZero(0.0)) {
      throw NumericError("vca_extract: failed to draw a direction orthogonal to the span");
    }
    const Eigen::VectorXd v = (f.transpose() * y).transpose();
    int best = 0;
    v.cwiseAbs().maxCoeff(&best);
    a.col(i) = y.col(best);
    indices[static_cast<std::size_t>(i)] = best;
  }
  return pick_rows(indices);
}

}  // namespace smile

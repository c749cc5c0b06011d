#include "smile/metrics.hpp"

#include <json.hpp>
#include <limits>

namespace smile {

SadSummary sad_mean(const EndmemberMatrix& est, const EndmemberMatrix& truth) {
  if (est.count() != truth.count() || est.channels() != truth.channels()) {
    throw DimensionError("sad_mean: endmember matrices differ in shape");
  }
  SadSummary summary;
  summary.per_endmember_deg.reserve(static_cast<std::size_t>(truth.count()));
  double total = 0.0;
  for (int i = 0; i < truth.count(); ++i) {
    const double angle = sad(truth.values.row(i), est.values.row(i));
    summary.per_endmember_deg.push_back(angle);
    total += angle;
  }
  summary.mean_deg = total / static_cast<double>(truth.count());
  return summary;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("solve_assignment: cost must be square");
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Potentials method, 1-based with a virtual column 0.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // match[j] = row in col j
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)]) - 1] = j - 1;
  }
  return assignment;
}

std::vector<int> align_permutation(const EndmemberMatrix& est, const EndmemberMatrix& truth) {
  if (est.count() != truth.count() || est.channels() != truth.channels()) {
    throw DimensionError("align_permutation: endmember matrices differ in shape");
  }
  const int p = truth.count();
  Eigen::MatrixXd cost(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) cost(i, j) = sad(truth.values.row(i), est.values.row(j));
  }
  return solve_assignment(cost);
}

EndmemberMatrix reorder_endmembers(const EndmemberMatrix& est, const std::vector<int>& perm) {
  EndmemberMatrix out(est.count(), est.channels());
  for (int i = 0; i < est.count(); ++i) {
    out.values.row(i) = est.values.row(perm[static_cast<std::size_t>(i)]);
  }
  return out;
}

AbundanceMap reorder_channels(const AbundanceMap& est, const std::vector<int>& perm) {
  AbundanceMap out(est.height, est.width, est.count);
  const int n = est.pixels();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < est.count; ++j) {
      out.values[static_cast<Eigen::Index>(i) * est.count + j] =
          est.values[static_cast<Eigen::Index>(i) * est.count + perm[static_cast<std::size_t>(j)]];
    }
  }
  return out;
}

double rmse(const AbundanceMap& est, const AbundanceMap& truth) {
  if (est.height != truth.height || est.width != truth.width || est.count != truth.count) {
    throw DimensionError("rmse: abundance maps differ in shape");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < est.values.size(); ++i) {
    const double d = est.values[i] - truth.values[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(truth.pixels()));
}

AadResult aad_detail(const AbundanceMap& est, const AbundanceMap& truth) {
  if (est.height != truth.height || est.width != truth.width || est.count != truth.count) {
    throw DimensionError("aad: abundance maps differ in shape");
  }
  const int n = truth.pixels();
  const int p = truth.count;
  AadResult result;
  double total = 0.0;
  int counted = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::Map<const Eigen::VectorXd> t(truth.values.data() + static_cast<Eigen::Index>(i) * p, p);
    Eigen::Map<const Eigen::VectorXd> e(est.values.data() + static_cast<Eigen::Index>(i) * p, p);
    if (t.norm() == 0.0 || e.norm() == 0.0) {
      ++result.excluded_pixels;
      continue;
    }
    total += sad(t, e);
    ++counted;
  }
  if (counted == 0) throw NumericError("aad: no pixels with nonzero abundance vectors");
  result.degrees = total / static_cast<double>(counted);
  return result;
}

double aad(const AbundanceMap& est, const AbundanceMap& truth) {
  return aad_detail(est, truth).degrees;
}

double snr_realized(const HsiCube& clean, const HsiCube& noisy) {
  if (clean.height != noisy.height || clean.width != noisy.width ||
      clean.channels != noisy.channels) {
    throw DimensionError("snr_realized: cube shapes differ");
  }
  const double signal = clean.values.square().sum();
  const double noise = (noisy.values - clean.values).square().sum();
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

MetricsReport evaluate(const AbundanceMap& est_abundance, const EndmemberMatrix& est_endmembers,
                       const AbundanceMap& truth_abundance,
                       const EndmemberMatrix& truth_endmembers) {
  MetricsReport report;
  report.permutation = align_permutation(est_endmembers, truth_endmembers);
  const EndmemberMatrix aligned_e = reorder_endmembers(est_endmembers, report.permutation);
  const AbundanceMap aligned_a = reorder_channels(est_abundance, report.permutation);

  report.rmse = rmse(aligned_a, truth_abundance);
  const AadResult aad_res = aad_detail(aligned_a, truth_abundance);
  report.aad_deg = aad_res.degrees;
  report.aad_excluded_pixels = aad_res.excluded_pixels;
  const SadSummary sads = sad_mean(aligned_e, truth_endmembers);
  report.sad_mean_deg = sads.mean_deg;
  report.sad_per_endmember_deg = sads.per_endmember_deg;
  return report;
}

std::string to_json_string(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["rmse"] = report.rmse;
  doc["aad_deg"] = report.aad_deg;
  doc["sad_deg"] = report.sad_mean_deg;
  for (std::size_t i = 0; i < report.sad_per_endmember_deg.size(); ++i) {
    doc["sad_" + std::to_string(i + 1)] = report.sad_per_endmember_deg[i];
  }
  doc["permutation"] = report.permutation;
  doc["aad_excluded_pixels"] = report.aad_excluded_pixels;
  if (report.snr_realized_db) doc["snr_realized_db"] = *report.snr_realized_db;
  return doc.dump(2);
}

}  // namespace smile

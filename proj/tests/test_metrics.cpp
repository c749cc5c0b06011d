#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "smile/errors.hpp"
#include "smile/metrics.hpp"

using namespace smile;
using namespace smile::testing;

namespace {

EndmemberMatrix random_endmembers(int p, int c, std::mt19937_64& rng) {
  EndmemberMatrix e(p, c);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < c; ++j) e.values(i, j) = unit(rng);
  return e;
}

double brute_force_assignment_cost(const Eigen::MatrixXd& cost, std::vector<int>* best_perm) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
    if (total < best) {
      best = total;
      if (best_perm) *best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("sad closed forms") {
  Eigen::VectorXd e1(2), e2(2), e3(2);
  e1 << 1, 0;
  e2 << 1, 1;
  e3 << 0, 1;
  CHECK(sad(e1, e2) == doctest::Approx(45.0).epsilon(1e-12));
  CHECK(sad(e1, e3) == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(sad(e1, Eigen::VectorXd(3 * e1)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)sad(e1, Eigen::VectorXd(Eigen::VectorXd::Zero(2))), NumericError);
}

TEST_CASE("sad is symmetric and scale invariant") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd a = random_array(6, rng, 0.01, 1.0).matrix();
    Eigen::VectorXd b = random_array(6, rng, 0.01, 1.0).matrix();
    const double ab = sad(a, b);
    CHECK(std::abs(ab - sad(b, a)) <= 1e-10);
    CHECK(std::abs(ab - sad(Eigen::VectorXd(7.3 * a), b)) <= 1e-10);
    CHECK(ab >= 0.0);
    CHECK(ab <= 180.0);
  }
}

TEST_CASE("align_permutation recovers shuffles and matches brute force") {
  std::mt19937_64 rng(29);
  EndmemberMatrix truth = random_endmembers(4, 16, rng);

  SUBCASE("identity") {
    std::vector<int> perm = align_permutation(truth, truth);
    for (int i = 0; i < 4; ++i) CHECK(perm[static_cast<std::size_t>(i)] == i);
  }

  SUBCASE("shuffle recovery") {
    const int shuffle[4] = {2, 0, 3, 1};  // est row j holds truth row shuffle_inv...
    EndmemberMatrix est(4, 16);
    for (int i = 0; i < 4; ++i) est.values.row(shuffle[i]) = truth.values.row(i);
    std::vector<int> perm = align_permutation(est, truth);
    for (int i = 0; i < 4; ++i) CHECK(perm[static_cast<std::size_t>(i)] == shuffle[i]);
  }

  SUBCASE("random cost matrices against exhaustive search") {
    for (int n = 2; n <= 6; ++n) {
      for (int trial = 0; trial < 25; ++trial) {
        Eigen::MatrixXd cost(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) cost(i, j) = random_array(1, rng, 0.0, 10.0)[0];
        std::vector<int> perm = solve_assignment(cost);
        double total = 0.0;
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
          total += cost(i, perm[static_cast<std::size_t>(i)]);
          seen[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 1;
        }
        for (char s : seen) CHECK(s == 1);
        CHECK(total == doctest::Approx(brute_force_assignment_cost(cost, nullptr)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("rmse closed forms") {
  AbundanceMap truth(3, 3, 4);
  truth.values.setConstant(0.25);
  CHECK(rmse(truth, truth) == 0.0);

  AbundanceMap off = truth;
  off.values += 0.1;
  CHECK(rmse(off, truth) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("aad closed forms and loop oracle") {
  AbundanceMap a(2, 2, 2);
  a.values.setConstant(0.5);
  CHECK(aad(a, a) <= 1e-5);

  AbundanceMap x(2, 2, 2), yv(2, 2, 2);
  for (int i = 0; i < 4; ++i) {
    x.values[2 * i] = 1.0;
    x.values[2 * i + 1] = 0.0;
    yv.values[2 * i] = 0.0;
    yv.values[2 * i + 1] = 1.0;
  }
  CHECK(aad(yv, x) == doctest::Approx(90.0).epsilon(1e-12));

  std::mt19937_64 rng(31);
  AbundanceMap est(3, 3, 2, random_array(18, rng, 0.01, 1.0));
  AbundanceMap truth(3, 3, 2, random_array(18, rng, 0.01, 1.0));
  double expected = 0.0;
  for (int i = 0; i < 9; ++i) {
    const double tx = truth.values[2 * i], ty = truth.values[2 * i + 1];
    const double ex = est.values[2 * i], ey = est.values[2 * i + 1];
    const double c =
        (tx * ex + ty * ey) / (std::sqrt(tx * tx + ty * ty) * std::sqrt(ex * ex + ey * ey));
    expected += std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg;
  }
  expected /= 9.0;
  CHECK(std::abs(aad(est, truth) - expected) <= 1e-10);
}

TEST_CASE("aad excludes zero pixels and rejects all-zero truth") {
  AbundanceMap truth(2, 1, 2);
  truth.at(0, 0, 0) = 1.0;  // second pixel stays zero
  AbundanceMap est(2, 1, 2);
  est.at(0, 0, 0) = 1.0;
  est.at(1, 0, 0) = 1.0;
  AadResult res = aad_detail(est, truth);
  CHECK(res.excluded_pixels == 1);
  CHECK(res.degrees <= 1e-5);

  AbundanceMap zeros(2, 1, 2);
  CHECK_THROWS_AS((void)aad(est, zeros), NumericError);
}

TEST_CASE("snr_realized closed forms") {
  HsiCube clean(2, 2, 2, Eigen::ArrayXd::Constant(8, 1.0));
  HsiCube noisy = clean;
  noisy.values += 0.1;  // noise energy = 8·0.01, signal = 8
  CHECK(snr_realized(clean, noisy) == doctest::Approx(20.0).epsilon(1e-12));

  HsiCube loud = clean;
  loud.values += 1.0;
  CHECK(snr_realized(clean, loud) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isinf(snr_realized(clean, clean)));
}

TEST_CASE("metrics are invariant to applying one permutation to both sides") {
  std::mt19937_64 rng(47);
  EndmemberMatrix e1 = random_endmembers(4, 12, rng);
  EndmemberMatrix e2 = random_endmembers(4, 12, rng);
  AbundanceMap a1(3, 2, 4, random_array(24, rng, 0.01, 1.0));
  AbundanceMap a2(3, 2, 4, random_array(24, rng, 0.01, 1.0));

  std::vector<int> perm = {3, 1, 0, 2};
  EndmemberMatrix e1p = reorder_endmembers(e1, perm);
  EndmemberMatrix e2p = reorder_endmembers(e2, perm);
  AbundanceMap a1p = reorder_channels(a1, perm);
  AbundanceMap a2p = reorder_channels(a2, perm);

  CHECK(std::abs(rmse(a1, a2) - rmse(a1p, a2p)) <= 1e-12);
  CHECK(std::abs(aad(a1, a2) - aad(a1p, a2p)) <= 1e-10);
  CHECK(std::abs(sad_mean(e1, e2).mean_deg - sad_mean(e1p, e2p).mean_deg) <= 1e-10);
}

TEST_CASE("evaluate aligns before scoring and serializes flat json") {
  std::mt19937_64 rng(53);
  EndmemberMatrix truth = random_endmembers(3, 10, rng);
  AbundanceMap truth_a(4, 4, 3, random_array(48, rng, 0.01, 1.0));

  std::vector<int> shuffle = {1, 2, 0};
  EndmemberMatrix est_e(3, 10);
  AbundanceMap est_a(4, 4, 3);
  for (int i = 0; i < 3; ++i) est_e.values.row(shuffle[static_cast<std::size_t>(i)]) = truth.values.row(i);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 3; ++j) {
      est_a.values[static_cast<Eigen::Index>(i) * 3 + shuffle[static_cast<std::size_t>(j)]] =
          truth_a.values[static_cast<Eigen::Index>(i) * 3 + j];
    }
  }

  MetricsReport rep = evaluate(est_a, est_e, truth_a, truth);
  CHECK(rep.rmse <= 1e-12);
  CHECK(rep.sad_mean_deg <= 1e-5);
  CHECK(rep.aad_deg <= 1e-5);

  const std::string json = to_json_string(rep);
  CHECK(json.find("\"rmse\"") != std::string::npos);
  CHECK(json.find("\"sad_1\"") != std::string::npos);
  CHECK(json.find("\"permutation\"") != std::string::npos);
}

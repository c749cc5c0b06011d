#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "smile/errors.hpp"
#include "smile/sr_branch.hpp"

using namespace smile;
using namespace smile::testing;

namespace {

SrConfig small_cfg() {
  SrConfig cfg;
  cfg.scale = 2;
  cfg.kernel_size = 3;
  cfg.noise_channels = 3;
  cfg.width = 4;
  return cfg;
}

double softplus_ref(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

}  // namespace

TEST_CASE("hr abundance has scale-times spatial dims and positive entries") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(3);
  NoiseInputs noise = NoiseInputs::sample(6, 5, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 4, rng);
  AbundanceMap a = generate_hr_abundance(noise, gen);
  CHECK(a.height == 12);
  CHECK(a.width == 10);
  CHECK(a.count == 4);
  CHECK(a.values.minCoeff() > 0.0);
}

TEST_CASE("all-zero generator weights give a constant softplus(bias) map") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(5);
  NoiseInputs noise = NoiseInputs::sample(4, 4, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  gen.k1.setZero();
  gen.k2.setZero();
  gen.k3.setZero();
  gen.kb3[0] = 0.7;
  gen.kb3[1] = -0.2;
  AbundanceMap a = generate_hr_abundance(noise, gen);
  for (int i = 0; i < a.pixels(); ++i) {
    CHECK(a.values[2 * i] == doctest::Approx(softplus_ref(0.7)).epsilon(1e-14));
    CHECK(a.values[2 * i + 1] == doctest::Approx(softplus_ref(-0.2)).epsilon(1e-14));
  }
}

TEST_CASE("hr generator matches an independent re-implementation") {
  SrConfig cfg = small_cfg();
  cfg.noise_channels = 2;
  cfg.width = 3;
  std::mt19937_64 rng(7);
  NoiseInputs noise = NoiseInputs::sample(2, 2, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  AbundanceMap got = generate_hr_abundance(noise, gen);

  const int h = noise.height, w = noise.width;
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };
  auto conv_layer = [&](const std::vector<double>& in, int cin, const Eigen::ArrayXd& k,
                        const Eigen::ArrayXd& b, int cout) {
    std::vector<double> out(static_cast<std::size_t>(h) * w * cout);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int co = 0; co < cout; ++co) {
          double acc = b[co];
          for (int u = 0; u < 3; ++u) {
            for (int v = 0; v < 3; ++v) {
              const int iy = reflect(y + u - 1, h);
              const int ix = reflect(x + v - 1, w);
              for (int ci = 0; ci < cin; ++ci) {
                acc += in[static_cast<std::size_t>((iy * w + ix) * cin + ci)] *
                       k[((u * 3 + v) * cin + ci) * cout + co];
              }
            }
          }
          out[static_cast<std::size_t>((y * w + x) * cout + co)] = softplus_ref(acc);
        }
      }
    }
    return out;
  };

  std::vector<double> x0(noise.l_y.data(), noise.l_y.data() + noise.l_y.size());
  auto x1 = conv_layer(x0, 2, gen.k1, gen.kb1, 3);
  auto x2 = conv_layer(x1, 3, gen.k2, gen.kb2, 3);
  auto x3 = conv_layer(x2, 3, gen.k3, gen.kb3, 2);
  for (std::size_t i = 0; i < x3.size(); ++i) {
    CHECK(std::abs(got.values[static_cast<Eigen::Index>(i)] - x3[i]) <= 1e-12);
  }
}

TEST_CASE("generated kernel is a probability mass over taps") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(11);
  NoiseInputs noise = NoiseInputs::sample(4, 4, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  Eigen::MatrixXd k = generate_kernel(noise, gen);
  CHECK(k.rows() == 3);
  CHECK(k.minCoeff() >= 0.0);
  CHECK(std::abs(k.sum() - 1.0) <= 1e-12);
}

TEST_CASE("a huge logit saturates the kernel softmax to a delta") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(13);
  NoiseInputs noise = NoiseInputs::sample(4, 4, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  gen.wk2.setZero();
  gen.bk2.setZero();
  gen.bk2[4] = 50.0;  // center tap of the 3×3 kernel
  Eigen::MatrixXd k = generate_kernel(noise, gen);
  CHECK(k(1, 1) >= 1.0 - 1e-12);
}

TEST_CASE("kernel generator gradients match finite differences") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(17);
  NoiseInputs noise = NoiseInputs::sample(2, 2, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);

  GradCase c;
  c.name = "kernel-mlp";
  c.params = {gen.wk1, gen.bk1, gen.wk2, gen.bk2};
  c.shapes = {{64, 64}, {64}, {64, 9}, {9}};
  Eigen::ArrayXd l_k = noise.l_k;
  c.build = [l_k](Tape& t, const std::vector<Tensor>& v) {
    Tensor lk = t.constant({64}, l_k);
    Tensor row = reshape(lk, {1, 64});
    Tensor h = softplus(add_rowwise(matmul(row, v[0]), v[1]));
    Tensor logits = add_rowwise(matmul(h, v[2]), v[3]);
    Tensor kernel = softmax_over_all(logits);
    return project_to_scalar(t, kernel, 7);
  };
  CHECK(run_grad_case(c) <= 1e-4);
}

TEST_CASE("downsample with a delta kernel is pure subsampling") {
  std::mt19937_64 rng(19);
  HsiCube hr(6, 6, 2, random_array(72, rng, 0.0, 1.0));
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(3, 3);
  delta(1, 1) = 1.0;
  HsiCube lr = downsample(hr, delta, 2);
  REQUIRE(lr.height == 3);
  REQUIRE(lr.width == 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 2; ++c) CHECK(lr(y, x, c) == hr(2 * y, 2 * x, c));
}

TEST_CASE("downsample preserves constants under unit-mass kernels") {
  HsiCube hr(8, 8, 3, Eigen::ArrayXd::Constant(192, 0.42));
  Eigen::MatrixXd k = Eigen::MatrixXd::Constant(5, 5, 1.0 / 25.0);
  HsiCube lr = downsample(hr, k, 2);
  for (Eigen::Index i = 0; i < lr.values.size(); ++i) {
    CHECK(lr.values[i] == doctest::Approx(0.42).epsilon(1e-14));
  }
}

TEST_CASE("downsample matches a brute-force sliding-window loop") {
  std::mt19937_64 rng(23);
  HsiCube hr(8, 8, 3, random_array(192, rng, 0.0, 1.0));
  Eigen::MatrixXd k(3, 3);
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v) k(u, v) = std::uniform_real_distribution<>(0, 1)(rng);
  k /= k.sum();
  HsiCube lr = downsample(hr, k, 2);

  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };
  for (int oy = 0; oy < 4; ++oy) {
    for (int ox = 0; ox < 4; ++ox) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int u = 0; u < 3; ++u)
          for (int v = 0; v < 3; ++v)
            acc += k(u, v) * hr(reflect(2 * oy + u - 1, 8), reflect(2 * ox + v - 1, 8), c);
        CHECK(std::abs(lr(oy, ox, c) - acc) <= 1e-12);
      }
    }
  }
}

TEST_CASE("downsample rejects non-dividing dims") {
  HsiCube hr(7, 8, 2, Eigen::ArrayXd::Constant(112, 0.5));
  Eigen::MatrixXd k = Eigen::MatrixXd::Constant(3, 3, 1.0 / 9.0);
  CHECK_THROWS_AS((void)downsample(hr, k, 2), DimensionError);
}

TEST_CASE("loss_l2 vanishes when the downsampled reconstruction equals the cube") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(29);
  NoiseInputs noise = NoiseInputs::sample(4, 4, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 3, rng);
  SharedDecoderParams decoder;
  decoder.endmembers = 3;
  decoder.channels = 6;
  decoder.theta_e = random_array(18, rng, 0.0, 1.0);

  AbundanceMap hr = generate_hr_abundance(noise, gen);
  Eigen::MatrixXd kernel = generate_kernel(noise, gen);
  HsiCube y = downsample(decode(hr, decoder), kernel, cfg.scale);
  CHECK(loss_l2(y, noise, gen, decoder, cfg) <= 1e-24);
}

TEST_CASE("s=1 with a delta kernel reduces loss_l2 to the plain reconstruction loss") {
  SrConfig cfg = small_cfg();
  cfg.scale = 1;
  std::mt19937_64 rng(31);
  NoiseInputs noise = NoiseInputs::sample(5, 4, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  SharedDecoderParams decoder;
  decoder.endmembers = 2;
  decoder.channels = 5;
  decoder.theta_e = random_array(10, rng, 0.1, 1.0);
  HsiCube y(5, 4, 5, random_array(100, rng, 0.0, 1.0));

  Eigen::ArrayXd delta = Eigen::ArrayXd::Zero(9);
  delta[4] = 1.0;

  // Graph with the pinned kernel, backward to θ_E.
  Tape tape;
  Tensor y_hwc = tape.constant({5, 4, 5}, y.values);
  Tensor l_y = tape.constant({noise.height, noise.width, noise.channels}, noise.l_y);
  SrBinding bind = bind_sr(tape, gen, false);
  Tensor theta = tape.variable({2, 5}, decoder.theta_e);
  Tensor hr = hr_abundance_graph(l_y, bind);
  Tensor kernel = tape.constant({3, 3}, delta);
  Tensor l2 = l2_graph(y_hwc, hr, theta, kernel, 1);
  const double l2v = l2.value();
  tape.backward(l2);
  Eigen::ArrayXd g_l2 = tape.grad(theta);

  // Plain reconstruction loss on (Â_HR, θ_E).
  AbundanceMap hr_plain = generate_hr_abundance(noise, gen);
  Tape tape2;
  Tensor a = tape2.constant({20, 2}, hr_plain.values);
  Tensor theta2 = tape2.variable({2, 5}, decoder.theta_e);
  Tensor y_nc = tape2.constant({20, 5}, y.values);
  Tensor plain = l1_graph(y_nc, decode_graph(a, theta2));
  CHECK(std::abs(plain.value() - l2v) <= 1e-12);
  tape2.backward(plain);
  Eigen::ArrayXd g_plain = tape2.grad(theta2);
  CHECK((g_l2 - g_plain).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("loss_l2 matches the composition of its component oracles") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(37);
  NoiseInputs noise = NoiseInputs::sample(3, 3, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  SharedDecoderParams decoder;
  decoder.endmembers = 2;
  decoder.channels = 4;
  decoder.theta_e = random_array(8, rng, 0.1, 1.0);
  HsiCube y(3, 3, 4, random_array(36, rng, 0.0, 1.0));

  const double got = loss_l2(y, noise, gen, decoder, cfg);
  HsiCube y2 = downsample(decode(generate_hr_abundance(noise, gen), decoder),
                          generate_kernel(noise, gen), cfg.scale);
  const double expected = (y.values - y2.values).square().sum() / y.values.size();
  CHECK(std::abs(got - expected) <= 1e-14 * std::max(1.0, expected));
}

TEST_CASE("loss_l2 couples the shared decoder: gradient w.r.t. theta is nonzero") {
  SrConfig cfg = small_cfg();
  std::mt19937_64 rng(41);
  NoiseInputs noise = NoiseInputs::sample(4, 4, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  Eigen::ArrayXd theta_vals = random_array(2 * 5, rng, 0.1, 1.0);
  HsiCube y(4, 4, 5, random_array(80, rng, 0.0, 1.0));

  Tape tape;
  Tensor y_hwc = tape.constant({4, 4, 5}, y.values);
  Tensor l_y = tape.constant({noise.height, noise.width, noise.channels}, noise.l_y);
  Tensor l_k = tape.constant({64}, noise.l_k);
  SrBinding bind = bind_sr(tape, gen, true);
  Tensor theta = tape.variable({2, 5}, theta_vals);
  Tensor l2 = l2_graph(y_hwc, hr_abundance_graph(l_y, bind), theta,
                       kernel_graph(l_k, bind, 3), cfg.scale);
  tape.backward(l2);
  CHECK(tape.grad(theta).abs().maxCoeff() > 0.0);
  CHECK(tape.grad(bind.wk1).abs().maxCoeff() > 0.0);  // kernel path is live too
}

TEST_CASE("sr gradients end to end match finite differences") {
  // Central differences resolve ~5e-12 absolute at step 1e-5; the seed keeps
  // every coordinate's gradient above that floor.
  SrConfig cfg = small_cfg();
  cfg.noise_channels = 2;
  cfg.width = 3;
  std::mt19937_64 rng(46);
  NoiseInputs noise = NoiseInputs::sample(3, 3, cfg, rng);
  SrGeneratorParams gen = SrGeneratorParams::random(cfg, 2, rng);
  Eigen::ArrayXd theta_vals = random_array(2 * 4, rng, 0.1, 1.0);
  Eigen::ArrayXd y_vals = random_array(36, rng, 0.0, 1.0);
  Eigen::ArrayXd l_y = noise.l_y, l_k = noise.l_k;

  GradCase c;
  c.name = "sr-branch";
  c.params = {gen.k1, gen.kb1, gen.k2, gen.kb2, gen.k3, gen.kb3,
              gen.wk1, gen.bk1, gen.wk2, gen.bk2, theta_vals};
  c.shapes = {{3, 3, 2, 3}, {3}, {3, 3, 3, 3}, {3}, {3, 3, 3, 2}, {2},
              {64, 64}, {64}, {64, 9}, {9}, {2, 4}};
  c.build = [l_y, l_k, y_vals, &noise](Tape& t, const std::vector<Tensor>& v) {
    SrBinding b;
    b.k1 = v[0]; b.kb1 = v[1]; b.k2 = v[2]; b.kb2 = v[3]; b.k3 = v[4]; b.kb3 = v[5];
    b.wk1 = v[6]; b.bk1 = v[7]; b.wk2 = v[8]; b.bk2 = v[9];
    Tensor y_hwc = t.constant({3, 3, 4}, y_vals);
    Tensor ly = t.constant({noise.height, noise.width, noise.channels}, l_y);
    Tensor lk = t.constant({64}, l_k);
    return l2_graph(y_hwc, hr_abundance_graph(ly, b), v[10], kernel_graph(lk, b, 3), 2);
  };
  CHECK(run_grad_case(c) <= 1e-4);
}

TEST_CASE("sr config validation") {
  SrConfig cfg;
  cfg.kernel_size = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.kernel_size = 5;
  cfg.scale = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "smile/ops.hpp"
#include "smile/tensor.hpp"

namespace smile::testing {

inline Eigen::ArrayXd random_array(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0,
                                   double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::ArrayXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

inline Eigen::ArrayXd random_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::ArrayXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

/// Push values away from 0 so finite differences never straddle a kink.
inline Eigen::ArrayXd nudged_from_zero(Eigen::ArrayXd v, double margin = 1e-3) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) < margin) v[i] = v[i] < 0.0 ? v[i] - margin : v[i] + margin;
  }
  return v;
}

/// One differentiable-op configuration: leaf parameter values plus a builder
/// that reconstructs the scalar objective from them.
struct GradCase {
  std::string name;
  std::vector<Eigen::ArrayXd> params;
  std::vector<std::vector<int>> shapes;
  std::function<Tensor(Tape&, const std::vector<Tensor>&)> build;
};

/// Max relative error between backward() gradients and central differences.
inline double run_grad_case(GradCase& c, double step = 1e-5) {
  auto eval = [&]() {
    Tape tape;
    std::vector<Tensor> vars;
    vars.reserve(c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) {
      vars.push_back(tape.variable(c.shapes[i], c.params[i]));
    }
    return c.build(tape, vars).value();
  };

  Tape tape;
  std::vector<Tensor> vars;
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    vars.push_back(tape.variable(c.shapes[i], c.params[i]));
  }
  Tensor loss = c.build(tape, vars);
  tape.backward(loss);
  std::vector<Eigen::ArrayXd> analytic;
  analytic.reserve(vars.size());
  for (const Tensor& v : vars) analytic.push_back(tape.grad(v));

  std::vector<Eigen::ArrayXd*> ptrs;
  ptrs.reserve(c.params.size());
  for (Eigen::ArrayXd& p : c.params) ptrs.push_back(&p);
  return finite_diff_check(eval, ptrs, analytic, step);
}

/// Weighted sum against a fixed random projection so every output entry gets a
/// generic adjoint.
inline Tensor project_to_scalar(Tape& tape, const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::ArrayXd w = random_array(out.size(), rng, 0.25, 1.75);
  Tensor wt = tape.constant(out.shape(), std::move(w));
  return sum(mul(out, wt));
}

inline const std::vector<std::string>& differentiable_op_names() {
  static const std::vector<std::string> names = {
      "matmul",   "conv2d_stride", "conv2d",     "softplus", "relu",
      "sigmoid",  "softmax",       "add",        "sub",      "mul",
      "scale",    "add_scalar",    "square",     "abs",      "add_rowwise",
      "row_sums", "sum",           "mean",       "reshape",  "nuclear_norm"};
  return names;
}

/// Randomized configuration of one named op, seeded for reproducibility.
inline GradCase make_grad_case(const std::string& op, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 12345);
  auto dim = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  GradCase c;
  c.name = op + "#" + std::to_string(seed);
  const std::uint64_t proj_seed = seed ^ 0xabcdef12ULL;

  if (op == "matmul") {
    const int m = dim(1, 4), k = dim(1, 4), n = dim(1, 4);
    c.params = {random_array(static_cast<Eigen::Index>(m) * k, rng),
                random_array(static_cast<Eigen::Index>(k) * n, rng)};
    c.shapes = {{m, k}, {k, n}};
    c.build = [proj_seed](Tape& t, const std::vector<Tensor>& v) {
      return project_to_scalar(t, matmul(v[0], v[1]), proj_seed);
    };
  } else if (op == "conv2d_stride") {
    const int h = dim(3, 7), w = dim(3, 7), ch = dim(1, 3);
    const int k = 2 * dim(0, 1) + 1;
    const int stride = dim(1, 2);
    c.params = {random_array(static_cast<Eigen::Index>(h) * w * ch, rng),
                random_array(static_cast<Eigen::Index>(k) * k, rng)};
    c.shapes = {{h, w, ch}, {k, k}};
    c.build = [proj_seed, stride](Tape& t, const std::vector<Tensor>& v) {
      return project_to_scalar(t, conv2d_stride(v[0], v[1], stride), proj_seed);
    };
  } else if (op == "conv2d") {
    const int h = dim(3, 5), w = dim(3, 5), cin = dim(1, 3), cout = dim(1, 3);
    const int k = 2 * dim(0, 1) + 1;
    c.params = {random_array(static_cast<Eigen::Index>(h) * w * cin, rng),
                random_array(static_cast<Eigen::Index>(k) * k * cin * cout, rng),
                random_array(cout, rng)};
    c.shapes = {{h, w, cin}, {k, k, cin, cout}, {cout}};
    c.build = [proj_seed](Tape& t, const std::vector<Tensor>& v) {
      return project_to_scalar(t, conv2d(v[0], v[1], v[2]), proj_seed);
    };
  } else if (op == "softplus" || op == "sigmoid" || op == "softmax" || op == "square" ||
             op == "scale" || op == "add_scalar" || op == "sum" || op == "mean" ||
             op == "relu" || op == "abs") {
    const int n = dim(2, 24);
    Eigen::ArrayXd x = random_array(n, rng, -2.0, 2.0);
    if (op == "relu" || op == "abs") x = nudged_from_zero(std::move(x));
    c.params = {std::move(x)};
    c.shapes = {{n}};
    c.build = [proj_seed, op](Tape& t, const std::vector<Tensor>& v) {
      Tensor out;
      if (op == "softplus") out = softplus(v[0]);
      else if (op == "sigmoid") out = sigmoid(v[0]);
      else if (op == "softmax") out = softmax_over_all(v[0]);
      else if (op == "square") out = square(v[0]);
      else if (op == "scale") out = scale(v[0], 1.7);
      else if (op == "add_scalar") out = add_scalar(v[0], -0.3);
      else if (op == "relu") out = relu(v[0]);
      else if (op == "abs") out = abs_value(v[0]);
      else if (op == "sum") return sum(v[0]);
      else return mean(v[0]);
      return project_to_scalar(t, out, proj_seed);
    };
  } else if (op == "add" || op == "sub" || op == "mul") {
    const int n = dim(2, 16);
    c.params = {random_array(n, rng), random_array(n, rng)};
    c.shapes = {{n}, {n}};
    c.build = [proj_seed, op](Tape& t, const std::vector<Tensor>& v) {
      Tensor out = op == "add" ? add(v[0], v[1]) : op == "sub" ? sub(v[0], v[1]) : mul(v[0], v[1]);
      return project_to_scalar(t, out, proj_seed);
    };
  } else if (op == "add_rowwise") {
    const int m = dim(1, 5), n = dim(1, 5);
    c.params = {random_array(static_cast<Eigen::Index>(m) * n, rng), random_array(n, rng)};
    c.shapes = {{m, n}, {n}};
    c.build = [proj_seed](Tape& t, const std::vector<Tensor>& v) {
      return project_to_scalar(t, add_rowwise(v[0], v[1]), proj_seed);
    };
  } else if (op == "row_sums") {
    const int m = dim(1, 5), n = dim(1, 5);
    c.params = {random_array(static_cast<Eigen::Index>(m) * n, rng)};
    c.shapes = {{m, n}};
    c.build = [proj_seed](Tape& t, const std::vector<Tensor>& v) {
      return project_to_scalar(t, row_sums(v[0]), proj_seed);
    };
  } else if (op == "reshape") {
    const int m = dim(1, 4), n = dim(1, 4);
    c.params = {random_array(static_cast<Eigen::Index>(m) * n * 2, rng)};
    c.shapes = {{m, n, 2}};
    c.build = [proj_seed, m, n](Tape& t, const std::vector<Tensor>& v) {
      return project_to_scalar(t, reshape(v[0], {m, n * 2}), proj_seed);
    };
  } else if (op == "nuclear_norm") {
    const int n = dim(2, 3), m = n + dim(2, 5);
    c.params = {random_normal(static_cast<Eigen::Index>(m) * n, rng)};
    c.shapes = {{m, n}};
    c.build = [](Tape&, const std::vector<Tensor>& v) { return nuclear_norm(v[0]); };
  } else {
    throw std::logic_error("make_grad_case: unknown op " + op);
  }
  return c;
}

}  // namespace smile::testing

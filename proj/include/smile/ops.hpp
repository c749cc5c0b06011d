#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "smile/tensor.hpp"

namespace smile {

// Reverse-mode operations over Tensors. Forward values are computed eagerly;
// when any operand requires a gradient the adjoint is recorded on the tape.
// Reductions accumulate in row-major sequential order so repeated runs are
// bit-identical.

/// C = A·B for 2-D tensors [m×k]·[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Channel-shared 2-D convolution with reflect padding and stride subsampling:
/// input [h×w×c] ⊛ kernel [k×k] -> [⌈h/stride⌉×⌈w/stride⌉×c], k odd.
Tensor conv2d_stride(const Tensor& input, const Tensor& kernel, int stride);

/// Multi-channel conv layer, stride 1, reflect padding:
/// input [h×w×cin], kernel [k×k×cin×cout], bias [cout] -> [h×w×cout].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

enum class Activation { Softplus, Relu, SoftmaxOverAll, Sigmoid };

Tensor activation(const Tensor& x, Activation kind);
Tensor softplus(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Softmax over the flattened tensor; output is nonnegative and sums to 1.
Tensor softmax_over_all(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor square(const Tensor& x);
/// |x| elementwise with the subgradient at 0 taken as 0.
Tensor abs_value(const Tensor& x);
/// mat [m×n] + row [n] broadcast over rows.
Tensor add_rowwise(const Tensor& mat, const Tensor& row);
/// [m×n] -> [m], sum over each row.
Tensor row_sums(const Tensor& mat);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Copies values into a new shape with the same element count.
Tensor reshape(const Tensor& x, std::vector<int> shape);

/// Nuclear norm of a 2-D tensor A: sum of sqrt(λ_i + ε) over the eigenvalues
/// of AᵀA, ε = 1e-12 (negative eigenvalues clamped to 0 first).
Tensor nuclear_norm(const Tensor& a);

/// Runs the tape's reverse sweep; see Tape::backward.
void backward(const Tensor& loss, Tape& tape);

/// Max over all parameter entries of
///   |analytic − central difference| / (|analytic| + 1e-12)
/// where f() re-evaluates the objective at the current parameter values.
/// `step` must lie in [1e-8, 1e-3]; non-finite f at a perturbed point throws
/// NumericError.
double finite_diff_check(const std::function<double()>& f,
                         std::span<Eigen::ArrayXd* const> params,
                         std::span<const Eigen::ArrayXd> analytic, double step);

namespace detail {
/// c[m×n] = a[m×k]·b[k×n], all row-major. Shared by tensor matmul and the
/// plain mixing arithmetic so the two produce bit-identical values.
void gemm_rm(const double* a, const double* b, double* c, Eigen::Index m, Eigen::Index k,
             Eigen::Index n);
/// Mirror index into [0, n): ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
int reflect_index(int i, int n);
}  // namespace detail

}  // namespace smile

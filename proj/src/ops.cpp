#include "smile/ops.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <utility>

#include "smile/errors.hpp"

namespace smile {

namespace detail {

void gemm_rm(const double* a, const double* b, double* c, Eigen::Index m, Eigen::Index k,
             Eigen::Index n) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> A(a, m, k);
  Eigen::Map<const RowMat> B(b, k, n);
  Eigen::Map<RowMat> C(c, m, n);
  C.noalias() = A * B;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace detail

namespace {

using detail::TapeAccess;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using MapCRM = Eigen::Map<const RowMat>;

Tape& tape_for(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->valid()) throw ContractError("operation on default-constructed tensor");
    Tape* owner = TapeAccess::tape_of(*t);
    if (tape == nullptr) {
      tape = owner;
    } else if (tape != owner) {
      throw ContractError("operands belong to different tapes");
    }
  }
  return *tape;
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

std::vector<std::uint64_t> grad_ids(std::initializer_list<const Tensor*> ts) {
  std::vector<std::uint64_t> ids;
  for (const Tensor* t : ts) {
    if (t->requires_grad()) ids.push_back(TapeAccess::node(*t).id);
  }
  return ids;
}

/// Elementwise unary op; `vjp` maps the output adjoint to the input adjoint.
Tensor unary_op(const Tensor& x, Eigen::ArrayXd out_values,
                std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)> vjp) {
  Tape& tape = tape_for({&x});
  Tensor out = TapeAccess::make(tape, x.shape(), std::move(out_values), x.requires_grad());
  if (out.requires_grad()) {
    Tensor xh = x;
    Tensor oh = out;
    TapeAccess::record(tape, TapeAccess::node(out).id, grad_ids({&x}),
                       [xh, oh, vjp = std::move(vjp)](Tape& t) {
                         const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
                         if (!g) return;
                         TapeAccess::slot(t, xh) += vjp(*g);
                       });
  }
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": operand shapes differ");
  }
}

double sequential_sum(const Eigen::ArrayXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: operands must be 2-D");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) throw DimensionError("matmul: inner extents disagree");
  Tape& tape = tape_for({&a, &b});

  Eigen::ArrayXd out(static_cast<Eigen::Index>(m) * n);
  detail::gemm_rm(a.values().data(), b.values().data(), out.data(), m, k, n);

  Tensor res = TapeAccess::make(tape, {m, n}, std::move(out), any_grad({&a, &b}));
  if (res.requires_grad()) {
    Tensor ah = a, bh = b, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&a, &b}),
                       [ah, bh, oh, m, k, n](Tape& t) {
                         const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
                         if (!g) return;
                         MapCRM G(g->data(), m, n);
                         if (ah.requires_grad()) {
                           MapCRM B(bh.values().data(), k, n);
                           RowMat da = G * B.transpose();
                           TapeAccess::slot(t, ah) +=
                               Eigen::Map<const Eigen::ArrayXd>(da.data(), da.size());
                         }
                         if (bh.requires_grad()) {
                           MapCRM A(ah.values().data(), m, k);
                           RowMat db = A.transpose() * G;
                           TapeAccess::slot(t, bh) +=
                               Eigen::Map<const Eigen::ArrayXd>(db.data(), db.size());
                         }
                       });
  }
  return res;
}

Tensor conv2d_stride(const Tensor& input, const Tensor& kernel, int stride) {
  if (input.rank() != 3) throw DimensionError("conv2d_stride: input must be h×w×c");
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1)) {
    throw DimensionError("conv2d_stride: kernel must be square 2-D");
  }
  const int k = kernel.dim(0);
  if (k % 2 == 0) throw ConfigError("conv2d_stride: kernel size must be odd");
  if (stride < 1) throw ConfigError("conv2d_stride: stride must be >= 1");

  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int r = (k - 1) / 2;
  const int oh = (h + stride - 1) / stride;
  const int ow = (w + stride - 1) / stride;

  // Reflected source indices per (output position, tap).
  std::vector<int> rows(static_cast<std::size_t>(oh) * k);
  for (int oy = 0; oy < oh; ++oy)
    for (int u = 0; u < k; ++u) rows[static_cast<std::size_t>(oy) * k + u] = detail::reflect_index(oy * stride + u - r, h);
  std::vector<int> cols(static_cast<std::size_t>(ow) * k);
  for (int ox = 0; ox < ow; ++ox)
    for (int v = 0; v < k; ++v) cols[static_cast<std::size_t>(ox) * k + v] = detail::reflect_index(ox * stride + v - r, w);

  Tape& tape = tape_for({&input, &kernel});
  const double* in = input.values().data();
  const double* ker = kernel.values().data();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(oh) * ow * c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      Eigen::Map<Eigen::ArrayXd> acc(out.data() + (static_cast<Eigen::Index>(oy) * ow + ox) * c, c);
      for (int u = 0; u < k; ++u) {
        const int iy = rows[static_cast<std::size_t>(oy) * k + u];
        for (int v = 0; v < k; ++v) {
          const int ix = cols[static_cast<std::size_t>(ox) * k + v];
          const double wgt = ker[u * k + v];
          acc += wgt * Eigen::Map<const Eigen::ArrayXd>(in + (static_cast<Eigen::Index>(iy) * w + ix) * c, c);
        }
      }
    }
  }

  Tensor res = TapeAccess::make(tape, {oh, ow, c}, std::move(out), any_grad({&input, &kernel}));
  if (res.requires_grad()) {
    Tensor ih = input, kh = kernel, oht = res;
    TapeAccess::record(
        tape, TapeAccess::node(res).id, grad_ids({&input, &kernel}),
        [ih, kh, oht, rows = std::move(rows), cols = std::move(cols), k, h, w, c, oh, ow](Tape& t) {
          const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oht);
          if (!g) return;
          const double* in = ih.values().data();
          const double* ker = kh.values().data();
          const bool want_in = ih.requires_grad();
          const bool want_k = kh.requires_grad();
          Eigen::ArrayXd* din = want_in ? &TapeAccess::slot(t, ih) : nullptr;
          Eigen::ArrayXd dk = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(k) * k);
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              Eigen::Map<const Eigen::ArrayXd> gsl(
                  g->data() + (static_cast<Eigen::Index>(oy) * ow + ox) * c, c);
              for (int u = 0; u < k; ++u) {
                const int iy = rows[static_cast<std::size_t>(oy) * k + u];
                for (int v = 0; v < k; ++v) {
                  const int ix = cols[static_cast<std::size_t>(ox) * k + v];
                  const Eigen::Index base = (static_cast<Eigen::Index>(iy) * w + ix) * c;
                  if (want_in) {
                    Eigen::Map<Eigen::ArrayXd>(din->data() + base, c) += ker[u * k + v] * gsl;
                  }
                  if (want_k) {
                    dk[u * k + v] += (gsl * Eigen::Map<const Eigen::ArrayXd>(in + base, c)).sum();
                  }
                }
              }
            }
          }
          if (want_k) TapeAccess::slot(t, kh) += dk;
        });
  }
  return res;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  if (input.rank() != 3) throw DimensionError("conv2d: input must be h×w×cin");
  if (kernel.rank() != 4 || kernel.dim(0) != kernel.dim(1)) {
    throw DimensionError("conv2d: kernel must be k×k×cin×cout");
  }
  const int k = kernel.dim(0);
  if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int cout = kernel.dim(3);
  if (kernel.dim(2) != cin) throw DimensionError("conv2d: kernel cin mismatch");
  if (bias.rank() != 1 || bias.dim(0) != cout) throw DimensionError("conv2d: bias size mismatch");

  const int r = (k - 1) / 2;
  const Eigen::Index npix = static_cast<Eigen::Index>(h) * w;
  const Eigen::Index patch = static_cast<Eigen::Index>(k) * k * cin;

  Tape& tape = tape_for({&input, &kernel, &bias});
  auto colmat = std::make_shared<RowMat>(npix, patch);
  {
    const double* in = input.values().data();
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < w; ++ox) {
        double* dst = colmat->data() + (static_cast<Eigen::Index>(oy) * w + ox) * patch;
        for (int u = 0; u < k; ++u) {
          const int iy = detail::reflect_index(oy + u - r, h);
          for (int v = 0; v < k; ++v) {
            const int ix = detail::reflect_index(ox + v - r, w);
            std::memcpy(dst + (static_cast<Eigen::Index>(u) * k + v) * cin,
                        in + (static_cast<Eigen::Index>(iy) * w + ix) * cin,
                        sizeof(double) * static_cast<std::size_t>(cin));
          }
        }
      }
    }
  }

  // Kernel stored k×k×cin×cout row-major flattens to (k·k·cin)×cout.
  Eigen::ArrayXd out(npix * cout);
  detail::gemm_rm(colmat->data(), kernel.values().data(), out.data(), npix, patch, cout);
  {
    const double* b = bias.values().data();
    for (Eigen::Index i = 0; i < npix; ++i) {
      Eigen::Map<Eigen::ArrayXd>(out.data() + i * cout, cout) +=
          Eigen::Map<const Eigen::ArrayXd>(b, cout);
    }
  }

  Tensor res =
      TapeAccess::make(tape, {h, w, cout}, std::move(out), any_grad({&input, &kernel, &bias}));
  if (res.requires_grad()) {
    Tensor ih = input, kh = kernel, bh = bias, oht = res;
    TapeAccess::record(
        tape, TapeAccess::node(res).id, grad_ids({&input, &kernel, &bias}),
        [ih, kh, bh, oht, colmat, k, h, w, cin, cout, r, npix, patch](Tape& t) {
          const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oht);
          if (!g) return;
          MapCRM G(g->data(), npix, cout);
          if (bh.requires_grad()) {
            Eigen::ArrayXd db = Eigen::ArrayXd::Zero(cout);
            for (Eigen::Index i = 0; i < npix; ++i) {
              db += Eigen::Map<const Eigen::ArrayXd>(g->data() + i * cout, cout);
            }
            TapeAccess::slot(t, bh) += db;
          }
          if (kh.requires_grad()) {
            RowMat dk = colmat->transpose() * G;
            TapeAccess::slot(t, kh) += Eigen::Map<const Eigen::ArrayXd>(dk.data(), dk.size());
          }
          if (ih.requires_grad()) {
            RowMat dcols = G * MapCRM(kh.values().data(), patch, cout).transpose();
            Eigen::ArrayXd& din = TapeAccess::slot(t, ih);
            for (int oy = 0; oy < h; ++oy) {
              for (int ox = 0; ox < w; ++ox) {
                const double* src = dcols.data() + (static_cast<Eigen::Index>(oy) * w + ox) * patch;
                for (int u = 0; u < k; ++u) {
                  const int iy = detail::reflect_index(oy + u - r, h);
                  for (int v = 0; v < k; ++v) {
                    const int ix = detail::reflect_index(ox + v - r, w);
                    Eigen::Map<Eigen::ArrayXd>(
                        din.data() + (static_cast<Eigen::Index>(iy) * w + ix) * cin, cin) +=
                        Eigen::Map<const Eigen::ArrayXd>(
                            src + (static_cast<Eigen::Index>(u) * k + v) * cin, cin);
                  }
                }
              }
            }
          }
        });
  }
  return res;
}

Tensor softplus(const Tensor& x) {
  // One pass produces both the value and the derivative from e = exp(-|x|):
  // softplus = max(x,0) + log(1+e), sigmoid = (x>=0 ? 1 : e)/(1+e). Vectorized
  // exp/log; for |x| > ~36 the log(1+e) tail flushes to 0, which is below
  // every tolerance in use.
  Eigen::ArrayXd e = (-x.values().abs()).exp();
  Eigen::ArrayXd y = x.values().max(0.0) + (1.0 + e).log();
  if (!x.requires_grad()) {
    return TapeAccess::make(tape_for({&x}), x.shape(), std::move(y), false);
  }
  Eigen::ArrayXd dydx = (x.values() >= 0.0).select(1.0, e) / (1.0 + e);
  return unary_op(x, std::move(y),
                  [dydx = std::move(dydx)](const Eigen::ArrayXd& g) -> Eigen::ArrayXd {
                    return g * dydx;
                  });
}

Tensor relu(const Tensor& x) {
  Tensor xh = x;
  return unary_op(x, x.values().max(0.0), [xh](const Eigen::ArrayXd& g) -> Eigen::ArrayXd {
    return (xh.values() > 0.0).select(g, 0.0);
  });
}

Tensor sigmoid(const Tensor& x) {
  Eigen::ArrayXd y = 0.5 * (1.0 + (0.5 * x.values()).tanh());
  Eigen::ArrayXd dydx = y * (1.0 - y);
  return unary_op(x, std::move(y),
                  [dydx = std::move(dydx)](const Eigen::ArrayXd& g) -> Eigen::ArrayXd {
                    return g * dydx;
                  });
}

Tensor softmax_over_all(const Tensor& x) {
  const double m = x.values().maxCoeff();
  Eigen::ArrayXd e = (x.values() - m).exp();
  const double total = sequential_sum(e);
  Eigen::ArrayXd y = e / total;
  Eigen::ArrayXd yc = y;
  return unary_op(x, std::move(y), [yc = std::move(yc)](const Eigen::ArrayXd& g) -> Eigen::ArrayXd {
    const double dot = sequential_sum(g * yc);
    return yc * (g - dot);
  });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::Softplus: return softplus(x);
    case Activation::Relu: return relu(x);
    case Activation::SoftmaxOverAll: return softmax_over_all(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  throw ConfigError("activation: unknown kind");
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tape& tape = tape_for({&a, &b});
  Tensor res = TapeAccess::make(tape, a.shape(), a.values() + b.values(), any_grad({&a, &b}));
  if (res.requires_grad()) {
    Tensor ah = a, bh = b, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&a, &b}), [ah, bh, oh](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      if (ah.requires_grad()) TapeAccess::slot(t, ah) += *g;
      if (bh.requires_grad()) TapeAccess::slot(t, bh) += *g;
    });
  }
  return res;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tape& tape = tape_for({&a, &b});
  Tensor res = TapeAccess::make(tape, a.shape(), a.values() - b.values(), any_grad({&a, &b}));
  if (res.requires_grad()) {
    Tensor ah = a, bh = b, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&a, &b}), [ah, bh, oh](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      if (ah.requires_grad()) TapeAccess::slot(t, ah) += *g;
      if (bh.requires_grad()) TapeAccess::slot(t, bh) -= *g;
    });
  }
  return res;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tape& tape = tape_for({&a, &b});
  Tensor res = TapeAccess::make(tape, a.shape(), a.values() * b.values(), any_grad({&a, &b}));
  if (res.requires_grad()) {
    Tensor ah = a, bh = b, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&a, &b}), [ah, bh, oh](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      if (ah.requires_grad()) TapeAccess::slot(t, ah) += *g * bh.values();
      if (bh.requires_grad()) TapeAccess::slot(t, bh) += *g * ah.values();
    });
  }
  return res;
}

Tensor scale(const Tensor& x, double c) {
  return unary_op(x, x.values() * c,
                  [c](const Eigen::ArrayXd& g) -> Eigen::ArrayXd { return g * c; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary_op(x, x.values() + c, [](const Eigen::ArrayXd& g) -> Eigen::ArrayXd { return g; });
}

Tensor square(const Tensor& x) {
  Tensor xh = x;
  return unary_op(x, x.values().square(), [xh](const Eigen::ArrayXd& g) -> Eigen::ArrayXd {
    return 2.0 * xh.values() * g;
  });
}

Tensor abs_value(const Tensor& x) {
  Tensor xh = x;
  return unary_op(x, x.values().abs(), [xh](const Eigen::ArrayXd& g) -> Eigen::ArrayXd {
    return g * xh.values().sign();
  });
}

Tensor add_rowwise(const Tensor& mat, const Tensor& row) {
  if (mat.rank() != 2 || row.rank() != 1) throw DimensionError("add_rowwise: need [m×n] and [n]");
  const int m = mat.dim(0), n = mat.dim(1);
  if (row.dim(0) != n) throw DimensionError("add_rowwise: row length mismatch");
  Tape& tape = tape_for({&mat, &row});
  Eigen::ArrayXd out = mat.values();
  for (int i = 0; i < m; ++i) {
    Eigen::Map<Eigen::ArrayXd>(out.data() + static_cast<Eigen::Index>(i) * n, n) +=
        Eigen::Map<const Eigen::ArrayXd>(row.values().data(), n);
  }
  Tensor res = TapeAccess::make(tape, {m, n}, std::move(out), any_grad({&mat, &row}));
  if (res.requires_grad()) {
    Tensor mh = mat, rh = row, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&mat, &row}),
                       [mh, rh, oh, m, n](Tape& t) {
                         const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
                         if (!g) return;
                         if (mh.requires_grad()) TapeAccess::slot(t, mh) += *g;
                         if (rh.requires_grad()) {
                           Eigen::ArrayXd dr = Eigen::ArrayXd::Zero(n);
                           for (int i = 0; i < m; ++i) {
                             dr += Eigen::Map<const Eigen::ArrayXd>(
                                 g->data() + static_cast<Eigen::Index>(i) * n, n);
                           }
                           TapeAccess::slot(t, rh) += dr;
                         }
                       });
  }
  return res;
}

Tensor row_sums(const Tensor& mat) {
  if (mat.rank() != 2) throw DimensionError("row_sums: need a 2-D tensor");
  const int m = mat.dim(0), n = mat.dim(1);
  Tape& tape = tape_for({&mat});
  Eigen::ArrayXd out(m);
  for (int i = 0; i < m; ++i) {
    out[i] = sequential_sum(
        Eigen::Map<const Eigen::ArrayXd>(mat.values().data() + static_cast<Eigen::Index>(i) * n, n));
  }
  Tensor res = TapeAccess::make(tape, {m}, std::move(out), mat.requires_grad());
  if (res.requires_grad()) {
    Tensor mh = mat, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&mat}), [mh, oh, m, n](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      Eigen::ArrayXd& dm = TapeAccess::slot(t, mh);
      for (int i = 0; i < m; ++i) {
        Eigen::Map<Eigen::ArrayXd>(dm.data() + static_cast<Eigen::Index>(i) * n, n) += (*g)[i];
      }
    });
  }
  return res;
}

Tensor sum(const Tensor& x) {
  Tape& tape = tape_for({&x});
  Eigen::ArrayXd out = Eigen::ArrayXd::Constant(1, sequential_sum(x.values()));
  Tensor res = TapeAccess::make(tape, {}, std::move(out), x.requires_grad());
  if (res.requires_grad()) {
    Tensor xh = x, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&x}), [xh, oh](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      TapeAccess::slot(t, xh) += (*g)[0];
    });
  }
  return res;
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  Tape& tape = tape_for({&x});
  Eigen::ArrayXd out = Eigen::ArrayXd::Constant(1, sequential_sum(x.values()) * inv);
  Tensor res = TapeAccess::make(tape, {}, std::move(out), x.requires_grad());
  if (res.requires_grad()) {
    Tensor xh = x, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&x}), [xh, oh, inv](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      TapeAccess::slot(t, xh) += (*g)[0] * inv;
    });
  }
  return res;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  Eigen::Index count = 1;
  for (int e : shape) count *= e;
  if (count != x.size()) throw DimensionError("reshape: element count mismatch");
  Tape& tape = tape_for({&x});
  // Same flat data under a new shape; no copy.
  Tensor res = TapeAccess::make_view(tape, std::move(shape), TapeAccess::values_ptr(x),
                                     x.requires_grad());
  if (res.requires_grad()) {
    Tensor xh = x, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&x}), [xh, oh](Tape& t) {
      const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
      if (!g) return;
      TapeAccess::slot(t, xh) += *g;
    });
  }
  return res;
}

Tensor nuclear_norm(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("nuclear_norm: need a 2-D tensor");
  const int m = a.dim(0), n = a.dim(1);
  constexpr double kEps = 1e-12;
  Tape& tape = tape_for({&a});

  MapCRM A(a.values().data(), m, n);
  Eigen::MatrixXd gram = A.transpose() * A;
  // Non-finite inputs propagate as NaN (like the elementwise ops) so the
  // trainer's divergence detection sees them instead of an eigensolver abort.
  if (!gram.array().isFinite().all()) {
    Tensor res = TapeAccess::make(
        tape, {}, Eigen::ArrayXd::Constant(1, std::numeric_limits<double>::quiet_NaN()),
        a.requires_grad());
    return res;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw NumericError("nuclear_norm: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  double val = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) val += std::sqrt(lam[i] + kEps);

  Tensor res =
      TapeAccess::make(tape, {}, Eigen::ArrayXd::Constant(1, val), a.requires_grad());
  if (res.requires_grad()) {
    Eigen::VectorXd inv_sqrt = (lam.array() + kEps).rsqrt();
    Eigen::MatrixXd proj =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
    Tensor ah = a, oh = res;
    TapeAccess::record(tape, TapeAccess::node(res).id, grad_ids({&a}),
                       [ah, oh, proj = std::move(proj), m, n](Tape& t) {
                         const Eigen::ArrayXd* g = TapeAccess::slot_if(t, oh);
                         if (!g) return;
                         MapCRM A(ah.values().data(), m, n);
                         RowMat da = (*g)[0] * (A * proj);
                         TapeAccess::slot(t, ah) +=
                             Eigen::Map<const Eigen::ArrayXd>(da.data(), da.size());
                       });
  }
  return res;
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

double finite_diff_check(const std::function<double()>& f,
                         std::span<Eigen::ArrayXd* const> params,
                         std::span<const Eigen::ArrayXd> analytic, double step) {
  if (step < 1e-8 || step > 1e-3) {
    throw ConfigError("finite_diff_check: step must lie in [1e-8, 1e-3]");
  }
  if (params.size() != analytic.size()) {
    throw DimensionError("finite_diff_check: params/analytic count mismatch");
  }
  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Eigen::ArrayXd& p = *params[pi];
    const Eigen::ArrayXd& an = analytic[pi];
    if (p.size() != an.size()) {
      throw DimensionError("finite_diff_check: gradient size mismatch");
    }
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double orig = p[j];
      p[j] = orig + step;
      const double fp = f();
      p[j] = orig - step;
      const double fm = f();
      p[j] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("finite_diff_check: non-finite objective at perturbed point");
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double rel = std::abs(an[j] - numeric) / (std::abs(an[j]) + 1e-12);
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace smile

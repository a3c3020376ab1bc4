// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/ops.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

extern "C" void openblas_set_num_threads(int);

namespace avfs {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Fresh output node; requires_grad reflects whether a recorded entry will
// feed it.
std::shared_ptr<TensorNode> make_node(Shape shape, bool track) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data.resize(static_cast<size_t>(shape_numel(n->shape)));
  n->requires_grad = track;
  n->leaf = !track;
  return n;
}

bool want_grad(const Tensor& a) {
  return Tape::recording() && a.requires_grad();
}
bool want_grad(const Tensor& a, const Tensor& b) {
  return Tape::recording() && (a.requires_grad() || b.requires_grad());
}
bool want_grad(const Tensor& a, const Tensor& b, const Tensor& c) {
  return Tape::recording() &&
         (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  AVFS_CHECK(same_shape(a.shape(), b.shape()), op, ": shape mismatch ",
             shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

// dgemm wrapper: C = alpha * op(A)·op(B) + beta * C, row-major.
// A is lda-strided (rows x cols as stored), similarly B, C.
void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  static const int once = [] {
    openblas_set_num_threads(1);
    return 0;
  }();
  (void)once;
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

}  // namespace

void init_numerics() { openblas_set_num_threads(1); }

// ---------------------------------------------------------------- elementwise

template <typename Fwd, typename Bwd>
static Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Bwd bwd) {
  bool track = want_grad(x);
  auto out = make_node(x.shape(), track);
  const double* in = x.data();
  double* o = out->data.data();
  int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) o[i] = fwd(in[i]);
  if (track) {
    auto xn = x.node();
    Tape::current()->record(name, out, [xn, out, bwd, n](GradMap* sink) {
      std::vector<double> gx(static_cast<size_t>(n));
      const double* go = out->grad.data();
      const double* in = xn->data.data();
      const double* od = out->data.data();
      for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>(i)] = go[i] * bwd(in[i], od[i]);
      accumulate_grad(xn, gx.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  bool track = want_grad(a, b);
  auto out = make_node(a.shape(), track);
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out->data[static_cast<size_t>(i)] = a.data()[i] + b.data()[i];
  if (track) {
    auto an = a.node(), bn = b.node();
    Tape::current()->record("add", out, [an, bn, out, n](GradMap* sink) {
      accumulate_grad(an, out->grad.data(), n, sink);
      accumulate_grad(bn, out->grad.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  bool track = want_grad(a, b);
  auto out = make_node(a.shape(), track);
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out->data[static_cast<size_t>(i)] = a.data()[i] - b.data()[i];
  if (track) {
    auto an = a.node(), bn = b.node();
    Tape::current()->record("sub", out, [an, bn, out, n](GradMap* sink) {
      accumulate_grad(an, out->grad.data(), n, sink);
      std::vector<double> gb(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) gb[static_cast<size_t>(i)] = -out->grad[static_cast<size_t>(i)];
      accumulate_grad(bn, gb.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  bool track = want_grad(a, b);
  auto out = make_node(a.shape(), track);
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out->data[static_cast<size_t>(i)] = a.data()[i] * b.data()[i];
  if (track) {
    auto an = a.node(), bn = b.node();
    Tape::current()->record("mul", out, [an, bn, out, n](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] = out->grad[static_cast<size_t>(i)] * bn->data[static_cast<size_t>(i)];
      accumulate_grad(an, g.data(), n, sink);
      for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] = out->grad[static_cast<size_t>(i)] * an->data[static_cast<size_t>(i)];
      accumulate_grad(bn, g.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  bool track = want_grad(a, b);
  auto out = make_node(a.shape(), track);
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out->data[static_cast<size_t>(i)] = a.data()[i] / b.data()[i];
  if (track) {
    auto an = a.node(), bn = b.node();
    Tape::current()->record("div", out, [an, bn, out, n](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] = out->grad[static_cast<size_t>(i)] / bn->data[static_cast<size_t>(i)];
      accumulate_grad(an, g.data(), n, sink);
      for (int64_t i = 0; i < n; ++i) {
        double bi = bn->data[static_cast<size_t>(i)];
        g[static_cast<size_t>(i)] = -out->grad[static_cast<size_t>(i)] * an->data[static_cast<size_t>(i)] / (bi * bi);
      }
      accumulate_grad(bn, g.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor scale(const Tensor& x, double c) {
  return unary_op("scale", x, [c](double v) { return v * c; },
                  [c](double, double) { return c; });
}

Tensor add_const(const Tensor& x, double c) {
  return unary_op("add_const", x, [c](double v) { return v + c; },
                  [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) {
  return unary_op("neg", x, [](double v) { return -v; },
                  [](double, double) { return -1.0; });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  AVFS_CHECK(s.numel() == 1, "mul_scalar: scalar operand has shape ",
             shape_str(s.shape()));
  bool track = want_grad(x, s);
  auto out = make_node(x.shape(), track);
  double sv = s.data()[0];
  int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out->data[static_cast<size_t>(i)] = x.data()[i] * sv;
  if (track) {
    auto xn = x.node(), sn = s.node();
    Tape::current()->record("mul_scalar", out, [xn, sn, out, n](GradMap* sink) {
      double sv = sn->data[0];
      std::vector<double> gx(static_cast<size_t>(n));
      double gs = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        gx[static_cast<size_t>(i)] = out->grad[static_cast<size_t>(i)] * sv;
        gs += out->grad[static_cast<size_t>(i)] * xn->data[static_cast<size_t>(i)];
      }
      accumulate_grad(xn, gx.data(), n, sink);
      accumulate_grad(sn, &gs, 1, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor relu(const Tensor& x) {
  return unary_op("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  return unary_op(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_(const Tensor& x) {
  return unary_op("exp", x, [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor log_(const Tensor& x) {
  return unary_op("log", x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor sqrt_(const Tensor& x) {
  return unary_op("sqrt", x, [](double v) { return std::sqrt(v); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary_op(
      "clamp", x,
      [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------- reductions

Tensor sum_all(const Tensor& x) {
  bool track = want_grad(x);
  auto out = make_node({1}, track);
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  out->data[0] = s;
  if (track) {
    auto xn = x.node();
    int64_t n = x.numel();
    Tape::current()->record("sum_all", out, [xn, out, n](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(n), out->grad[0]);
      accumulate_grad(xn, g.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  check_same_shape("dot", a, b);
  bool track = want_grad(a, b);
  auto out = make_node({1}, track);
  int64_t n = a.numel();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a.data()[i] * b.data()[i];
  out->data[0] = s;
  if (track) {
    auto an = a.node(), bn = b.node();
    Tape::current()->record("dot", out, [an, bn, out, n](GradMap* sink) {
      double go = out->grad[0];
      std::vector<double> g(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] = go * bn->data[static_cast<size_t>(i)];
      accumulate_grad(an, g.data(), n, sink);
      for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] = go * an->data[static_cast<size_t>(i)];
      accumulate_grad(bn, g.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

// ---------------------------------------------------------------- layout

Tensor transpose2d(const Tensor& x) {
  AVFS_CHECK(x.ndim() == 2, "transpose2d: need 2-D, got ", shape_str(x.shape()));
  int r = x.dim(0), c = x.dim(1);
  bool track = want_grad(x);
  auto out = make_node({c, r}, track);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out->data[static_cast<size_t>(j) * r + i] = x.data()[static_cast<size_t>(i) * c + j];
  if (track) {
    auto xn = x.node();
    Tape::current()->record("transpose2d", out, [xn, out, r, c](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * c);
      for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i)
          g[static_cast<size_t>(i) * c + j] = out->grad[static_cast<size_t>(j) * r + i];
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor rows(const Tensor& x, int r0, int r1) {
  AVFS_CHECK(x.ndim() == 2 && r0 >= 0 && r1 <= x.dim(0) && r0 < r1,
             "rows: bad range [", r0, ",", r1, ") for ", shape_str(x.shape()));
  int c = x.dim(1);
  bool track = want_grad(x);
  auto out = make_node({r1 - r0, c}, track);
  std::memcpy(out->data.data(), x.data() + static_cast<size_t>(r0) * c,
              out->data.size() * sizeof(double));
  if (track) {
    auto xn = x.node();
    Tape::current()->record("rows", out, [xn, out, r0, c](GradMap* sink) {
      int64_t n = static_cast<int64_t>(xn->data.size());
      std::vector<double> g(static_cast<size_t>(n), 0.0);
      std::memcpy(g.data() + static_cast<size_t>(r0) * c, out->grad.data(),
                  out->grad.size() * sizeof(double));
      accumulate_grad(xn, g.data(), n, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor cols(const Tensor& x, int c0, int c1) {
  AVFS_CHECK(x.ndim() == 2 && c0 >= 0 && c1 <= x.dim(1) && c0 < c1,
             "cols: bad range [", c0, ",", c1, ") for ", shape_str(x.shape()));
  int r = x.dim(0), c = x.dim(1), w = c1 - c0;
  bool track = want_grad(x);
  auto out = make_node({r, w}, track);
  for (int i = 0; i < r; ++i)
    std::memcpy(out->data.data() + static_cast<size_t>(i) * w,
                x.data() + static_cast<size_t>(i) * c + c0, static_cast<size_t>(w) * sizeof(double));
  if (track) {
    auto xn = x.node();
    Tape::current()->record("cols", out, [xn, out, c0, r, c, w](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * c, 0.0);
      for (int i = 0; i < r; ++i)
        std::memcpy(g.data() + static_cast<size_t>(i) * c + c0,
                    out->grad.data() + static_cast<size_t>(i) * w,
                    static_cast<size_t>(w) * sizeof(double));
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  AVFS_CHECK(!xs.empty(), "concat_rows: empty input");
  int c = xs[0].dim(1), rtot = 0;
  bool track = false;
  for (const auto& t : xs) {
    AVFS_CHECK(t.ndim() == 2 && t.dim(1) == c, "concat_rows: column mismatch");
    rtot += t.dim(0);
    track = track || want_grad(t);
  }
  auto out = make_node({rtot, c}, track);
  size_t off = 0;
  for (const auto& t : xs) {
    std::memcpy(out->data.data() + off, t.data(), static_cast<size_t>(t.numel()) * sizeof(double));
    off += static_cast<size_t>(t.numel());
  }
  if (track) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    for (const auto& t : xs) nodes.push_back(t.node());
    Tape::current()->record("concat_rows", out, [nodes, out](GradMap* sink) {
      size_t off = 0;
      for (const auto& n : nodes) {
        accumulate_grad(n, out->grad.data() + off,
                        static_cast<int64_t>(n->data.size()), sink);
        off += n->data.size();
      }
    });
  }
  return Tensor::from_node(out);
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  AVFS_CHECK(!xs.empty(), "concat_cols: empty input");
  int r = xs[0].dim(0), ctot = 0;
  bool track = false;
  for (const auto& t : xs) {
    AVFS_CHECK(t.ndim() == 2 && t.dim(0) == r, "concat_cols: row mismatch");
    ctot += t.dim(1);
    track = track || want_grad(t);
  }
  auto out = make_node({r, ctot}, track);
  int coff = 0;
  for (const auto& t : xs) {
    int w = t.dim(1);
    for (int i = 0; i < r; ++i)
      std::memcpy(out->data.data() + static_cast<size_t>(i) * ctot + coff,
                  t.data() + static_cast<size_t>(i) * w, static_cast<size_t>(w) * sizeof(double));
    coff += w;
  }
  if (track) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    std::vector<int> widths;
    for (const auto& t : xs) {
      nodes.push_back(t.node());
      widths.push_back(t.dim(1));
    }
    Tape::current()->record("concat_cols", out, [nodes, widths, out, r, ctot](GradMap* sink) {
      int coff = 0;
      for (size_t k = 0; k < nodes.size(); ++k) {
        int w = widths[k];
        std::vector<double> g(static_cast<size_t>(r) * w);
        for (int i = 0; i < r; ++i)
          std::memcpy(g.data() + static_cast<size_t>(i) * w,
                      out->grad.data() + static_cast<size_t>(i) * ctot + coff,
                      static_cast<size_t>(w) * sizeof(double));
        accumulate_grad(nodes[k], g.data(), static_cast<int64_t>(g.size()), sink);
        coff += w;
      }
    });
  }
  return Tensor::from_node(out);
}

Tensor pad_cols(const Tensor& x, int left, int right) {
  AVFS_CHECK(x.ndim() == 2 && left >= 0 && right >= 0, "pad_cols: bad args");
  if (left == 0 && right == 0) return x;
  int r = x.dim(0), c = x.dim(1), cw = c + left + right;
  bool track = want_grad(x);
  auto out = make_node({r, cw}, track);
  std::fill(out->data.begin(), out->data.end(), 0.0);
  for (int i = 0; i < r; ++i)
    std::memcpy(out->data.data() + static_cast<size_t>(i) * cw + left,
                x.data() + static_cast<size_t>(i) * c, static_cast<size_t>(c) * sizeof(double));
  if (track) {
    auto xn = x.node();
    Tape::current()->record("pad_cols", out, [xn, out, left, r, c, cw](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * c);
      for (int i = 0; i < r; ++i)
        std::memcpy(g.data() + static_cast<size_t>(i) * c,
                    out->grad.data() + static_cast<size_t>(i) * cw + left,
                    static_cast<size_t>(c) * sizeof(double));
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor col_interleave(const Tensor& x, int A, int B) {
  AVFS_CHECK(x.ndim() == 2 && x.dim(1) == A * B,
             "col_interleave: need ", A, "*", B, " columns, got ",
             shape_str(x.shape()));
  int r = x.dim(0), c = x.dim(1);
  bool track = want_grad(x);
  auto out = make_node({r, c}, track);
  for (int i = 0; i < r; ++i) {
    const double* src = x.data() + static_cast<size_t>(i) * c;
    double* dst = out->data.data() + static_cast<size_t>(i) * c;
    for (int a = 0; a < A; ++a)
      for (int b = 0; b < B; ++b) dst[b * A + a] = src[a * B + b];
  }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("col_interleave", out, [xn, out, A, B, r, c](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * c);
      for (int i = 0; i < r; ++i) {
        const double* go = out->grad.data() + static_cast<size_t>(i) * c;
        double* dst = g.data() + static_cast<size_t>(i) * c;
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b) dst[a * B + b] = go[b * A + a];
      }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

// Center-aligned linear resampling weights: output column j samples input
// position (j + 0.5) * Lin/Lout - 0.5, clamped to the valid range.
static void resample_coeffs(int lin, int lout, int j, int* i0, int* i1,
                            double* w0, double* w1) {
  double pos = (j + 0.5) * static_cast<double>(lin) / lout - 0.5;
  if (pos <= 0.0) {
    *i0 = *i1 = 0;
    *w0 = 1.0;
    *w1 = 0.0;
    return;
  }
  if (pos >= lin - 1) {
    *i0 = *i1 = lin - 1;
    *w0 = 1.0;
    *w1 = 0.0;
    return;
  }
  *i0 = static_cast<int>(pos);
  *i1 = *i0 + 1;
  *w1 = pos - *i0;
  *w0 = 1.0 - *w1;
}

Tensor resample_cols(const Tensor& x, int L_out) {
  AVFS_CHECK(x.ndim() == 2 && L_out >= 1, "resample_cols: bad args");
  int r = x.dim(0), lin = x.dim(1);
  if (lin == L_out) return x;
  bool track = want_grad(x);
  auto out = make_node({r, L_out}, track);
  for (int j = 0; j < L_out; ++j) {
    int i0, i1;
    double w0, w1;
    resample_coeffs(lin, L_out, j, &i0, &i1, &w0, &w1);
    for (int i = 0; i < r; ++i)
      out->data[static_cast<size_t>(i) * L_out + j] =
          w0 * x.data()[static_cast<size_t>(i) * lin + i0] +
          w1 * x.data()[static_cast<size_t>(i) * lin + i1];
  }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("resample_cols", out, [xn, out, r, lin, L_out](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * lin, 0.0);
      for (int j = 0; j < L_out; ++j) {
        int i0, i1;
        double w0, w1;
        resample_coeffs(lin, L_out, j, &i0, &i1, &w0, &w1);
        for (int i = 0; i < r; ++i) {
          double go = out->grad[static_cast<size_t>(i) * L_out + j];
          g[static_cast<size_t>(i) * lin + i0] += w0 * go;
          g[static_cast<size_t>(i) * lin + i1] += w1 * go;
        }
      }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  AVFS_CHECK(x.ndim() == 2 && b.ndim() == 1 && b.dim(0) == x.dim(0),
             "add_bias: x ", shape_str(x.shape()), " vs bias ",
             shape_str(b.shape()));
  int r = x.dim(0), c = x.dim(1);
  bool track = want_grad(x, b);
  auto out = make_node(x.shape(), track);
  for (int i = 0; i < r; ++i) {
    double bi = b.data()[i];
    for (int j = 0; j < c; ++j)
      out->data[static_cast<size_t>(i) * c + j] = x.data()[static_cast<size_t>(i) * c + j] + bi;
  }
  if (track) {
    auto xn = x.node(), bn = b.node();
    Tape::current()->record("add_bias", out, [xn, bn, out, r, c](GradMap* sink) {
      accumulate_grad(xn, out->grad.data(), static_cast<int64_t>(out->grad.size()), sink);
      std::vector<double> gb(static_cast<size_t>(r), 0.0);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gb[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i) * c + j];
      accumulate_grad(bn, gb.data(), r, sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor mean_cols(const Tensor& x) {
  AVFS_CHECK(x.ndim() == 2, "mean_cols: need 2-D");
  int r = x.dim(0), c = x.dim(1);
  bool track = want_grad(x);
  auto out = make_node({r, 1}, track);
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += x.data()[static_cast<size_t>(i) * c + j];
    out->data[static_cast<size_t>(i)] = s / c;
  }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("mean_cols", out, [xn, out, r, c](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * c);
      for (int i = 0; i < r; ++i) {
        double gi = out->grad[static_cast<size_t>(i)] / c;
        for (int j = 0; j < c; ++j) g[static_cast<size_t>(i) * c + j] = gi;
      }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

// ---------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  AVFS_CHECK(a.ndim() == 2 && b.ndim() == 2, "matmul: need 2-D operands, got ",
             shape_str(a.shape()), " x ", shape_str(b.shape()));
  int m = trans_a ? a.dim(1) : a.dim(0);
  int ka = trans_a ? a.dim(0) : a.dim(1);
  int kb = trans_b ? b.dim(1) : b.dim(0);
  int n = trans_b ? b.dim(0) : b.dim(1);
  AVFS_CHECK(ka == kb, "matmul: inner dims disagree: ", shape_str(a.shape()),
             (trans_a ? "^T" : ""), " x ", shape_str(b.shape()),
             (trans_b ? "^T" : ""));
  bool track = want_grad(a, b);
  auto out = make_node({m, n}, track);
  gemm(trans_a, trans_b, m, n, ka, 1.0, a.data(), a.dim(1), b.data(), b.dim(1),
       0.0, out->data.data(), n);
  if (track) {
    auto an = a.node(), bn = b.node();
    Tape::current()->record("matmul", out, [an, bn, out, m, n, ka, trans_a, trans_b](GradMap* sink) {
      const double* gc = out->grad.data();
      int lda = static_cast<int>(an->shape[1]);
      int ldb = static_cast<int>(bn->shape[1]);
      if (an->requires_grad) {
        std::vector<double> ga(an->data.size());
        if (!trans_a) {
          // dA = dC · op(B)^T
          if (!trans_b)
            gemm(false, true, m, ka, n, 1.0, gc, n, bn->data.data(), ldb, 0.0, ga.data(), ka);
          else
            gemm(false, false, m, ka, n, 1.0, gc, n, bn->data.data(), ldb, 0.0, ga.data(), ka);
        } else {
          // dA = op(B) · dC^T  (A stored [ka, m])
          if (!trans_b)
            gemm(false, true, ka, m, n, 1.0, bn->data.data(), ldb, gc, n, 0.0, ga.data(), m);
          else
            gemm(true, true, ka, m, n, 1.0, bn->data.data(), ldb, gc, n, 0.0, ga.data(), m);
        }
        accumulate_grad(an, ga.data(), static_cast<int64_t>(ga.size()), sink);
      }
      if (bn->requires_grad) {
        std::vector<double> gb(bn->data.size());
        if (!trans_b) {
          // dB = op(A)^T · dC   (B stored [ka, n])
          if (!trans_a)
            gemm(true, false, ka, n, m, 1.0, an->data.data(), lda, gc, n, 0.0, gb.data(), n);
          else
            gemm(false, false, ka, n, m, 1.0, an->data.data(), lda, gc, n, 0.0, gb.data(), n);
        } else {
          // dB = dC^T · op(A)   (B stored [n, ka])
          if (!trans_a)
            gemm(true, false, n, ka, m, 1.0, gc, n, an->data.data(), lda, 0.0, gb.data(), ka);
          else
            gemm(true, true, n, ka, m, 1.0, gc, n, an->data.data(), lda, 0.0, gb.data(), ka);
        }
        accumulate_grad(bn, gb.data(), static_cast<int64_t>(gb.size()), sink);
      }
    });
  }
  return Tensor::from_node(out);
}

// ---------------------------------------------------------------- conv1d

namespace {

// im2col for 1-D convolution: x[Ci,T] -> cols[(Ci*K), L] with
// cols[(i*K + k), l] = x[i, l*stride + k*dilation].
void im2col(const double* x, int ci, int t, int k, int stride, int dilation,
            int l, std::vector<double>& cols) {
  cols.resize(static_cast<size_t>(ci) * k * l);
  for (int i = 0; i < ci; ++i)
    for (int kk = 0; kk < k; ++kk) {
      double* dst = cols.data() + (static_cast<size_t>(i) * k + kk) * l;
      const double* src = x + static_cast<size_t>(i) * t + kk * dilation;
      for (int j = 0; j < l; ++j) dst[j] = src[static_cast<size_t>(j) * stride];
    }
}

// Adjoint of im2col: scatter cols back into x-layout.
void col2im(const std::vector<double>& cols, int ci, int t, int k, int stride,
            int dilation, int l, double* x) {
  std::fill(x, x + static_cast<size_t>(ci) * t, 0.0);
  for (int i = 0; i < ci; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double* src = cols.data() + (static_cast<size_t>(i) * k + kk) * l;
      double* dst = x + static_cast<size_t>(i) * t + kk * dilation;
      for (int j = 0; j < l; ++j) dst[static_cast<size_t>(j) * stride] += src[j];
    }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int dilation) {
  AVFS_CHECK(x.ndim() == 2 && w.ndim() == 3, "conv1d: x ", shape_str(x.shape()),
             ", w ", shape_str(w.shape()));
  AVFS_CHECK(stride >= 1 && dilation >= 1, "conv1d: stride/dilation must be >= 1");
  int ci = x.dim(0), t = x.dim(1);
  int co = w.dim(0), k = w.dim(2);
  AVFS_CHECK(w.dim(1) == ci, "conv1d: channel mismatch x ", shape_str(x.shape()),
             " w ", shape_str(w.shape()));
  int span = dilation * (k - 1) + 1;
  if (t < span)
    throw ShapeError(str_cat("conv1d: input too short: T=", t, " < kernel span ", span));
  int l = (t - span) / stride + 1;
  bool track = want_grad(x, w);
  auto out = make_node({co, l}, track);
  std::vector<double> colbuf;
  im2col(x.data(), ci, t, k, stride, dilation, l, colbuf);
  // out[Co, L] = W[Co, Ci*K] · cols[Ci*K, L]
  gemm(false, false, co, l, ci * k, 1.0, w.data(), ci * k, colbuf.data(), l,
       0.0, out->data.data(), l);
  if (track) {
    auto xn = x.node(), wn = w.node();
    Tape::current()->record("conv1d", out, [xn, wn, out, ci, t, co, k, stride, dilation, l](GradMap* sink) {
      std::vector<double> colbuf;
      im2col(xn->data.data(), ci, t, k, stride, dilation, l, colbuf);
      const double* go = out->grad.data();
      if (wn->requires_grad) {
        // dW = dY · cols^T
        std::vector<double> gw(wn->data.size());
        gemm(false, true, co, ci * k, l, 1.0, go, l, colbuf.data(), l, 0.0,
             gw.data(), ci * k);
        accumulate_grad(wn, gw.data(), static_cast<int64_t>(gw.size()), sink);
      }
      if (xn->requires_grad) {
        // dcols = W^T · dY, then scatter back
        std::vector<double> gcols(colbuf.size());
        gemm(true, false, ci * k, l, co, 1.0, wn->data.data(), ci * k, go, l,
             0.0, gcols.data(), l);
        std::vector<double> gx(xn->data.size());
        col2im(gcols, ci, t, k, stride, dilation, l, gx.data());
        accumulate_grad(xn, gx.data(), static_cast<int64_t>(gx.size()), sink);
      }
    });
  }
  return Tensor::from_node(out);
}

Tensor conv1d_transpose(const Tensor& y, const Tensor& w, int stride) {
  AVFS_CHECK(y.ndim() == 2 && w.ndim() == 3, "conv1d_transpose: y ",
             shape_str(y.shape()), ", w ", shape_str(w.shape()));
  AVFS_CHECK(stride >= 1, "conv1d_transpose: stride must be >= 1");
  int ci = y.dim(0), l = y.dim(1);
  AVFS_CHECK(w.dim(0) == ci, "conv1d_transpose: channel mismatch y ",
             shape_str(y.shape()), " w ", shape_str(w.shape()));
  int co = w.dim(1), k = w.dim(2);
  int t = (l - 1) * stride + k;
  bool track = want_grad(y, w);
  auto out = make_node({co, t}, track);
  // tmp[(b*K + k), l] = sum_a w[a,b,k] * y[a,l]; then scatter-add.
  // W viewed as [Ci, Co*K] row-major matches w's layout directly.
  std::vector<double> tmp(static_cast<size_t>(co) * k * l);
  gemm(true, false, co * k, l, ci, 1.0, w.data(), co * k, y.data(), l, 0.0,
       tmp.data(), l);
  col2im(tmp, co, t, k, stride, 1, l, out->data.data());
  if (track) {
    auto yn = y.node(), wn = w.node();
    Tape::current()->record("conv1d_transpose", out, [yn, wn, out, ci, l, co, k, stride, t](GradMap* sink) {
      // dOut[Co, T] gathered back to columns: gcols[(b*K+k), l] = dOut[b, l*s + k]
      std::vector<double> gcols;
      im2col(out->grad.data(), co, t, k, stride, 1, l, gcols);
      if (yn->requires_grad) {
        // dY[a, l] = sum_{b,k} w[a,b,k] * gcols[(b*K+k), l]
        std::vector<double> gy(yn->data.size());
        gemm(false, false, ci, l, co * k, 1.0, wn->data.data(), co * k,
             gcols.data(), l, 0.0, gy.data(), l);
        accumulate_grad(yn, gy.data(), static_cast<int64_t>(gy.size()), sink);
      }
      if (wn->requires_grad) {
        // dW[a, (b,k)] = sum_l y[a,l] * gcols[(b*K+k), l]
        std::vector<double> gw(wn->data.size());
        gemm(false, true, ci, co * k, l, 1.0, yn->data.data(), l, gcols.data(),
             l, 0.0, gw.data(), co * k);
        accumulate_grad(wn, gw.data(), static_cast<int64_t>(gw.size()), sink);
      }
    });
  }
  return Tensor::from_node(out);
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& w) {
  AVFS_CHECK(x.ndim() == 2 && w.ndim() == 2 && w.dim(0) == x.dim(0),
             "depthwise_conv1d: x ", shape_str(x.shape()), ", w ",
             shape_str(w.shape()));
  int c = x.dim(0), t = x.dim(1), kd = w.dim(1);
  if (kd % 2 == 0)
    throw ConfigError(str_cat("depthwise_conv1d: kernel must be odd, got ", kd));
  int half = kd / 2;
  bool track = want_grad(x, w);
  auto out = make_node(x.shape(), track);
  for (int i = 0; i < c; ++i) {
    const double* xi = x.data() + static_cast<size_t>(i) * t;
    const double* wi = w.data() + static_cast<size_t>(i) * kd;
    double* oi = out->data.data() + static_cast<size_t>(i) * t;
    for (int j = 0; j < t; ++j) {
      double s = 0.0;
      int k0 = std::max(0, half - j), k1 = std::min(kd, t + half - j);
      for (int k = k0; k < k1; ++k) s += wi[k] * xi[j + k - half];
      oi[j] = s;
    }
  }
  if (track) {
    auto xn = x.node(), wn = w.node();
    Tape::current()->record("depthwise_conv1d", out, [xn, wn, out, c, t, kd, half](GradMap* sink) {
      const double* go = out->grad.data();
      if (xn->requires_grad) {
        std::vector<double> gx(xn->data.size(), 0.0);
        for (int i = 0; i < c; ++i) {
          const double* wi = wn->data.data() + static_cast<size_t>(i) * kd;
          const double* gi = go + static_cast<size_t>(i) * t;
          double* gxi = gx.data() + static_cast<size_t>(i) * t;
          for (int j = 0; j < t; ++j) {
            int k0 = std::max(0, half - j), k1 = std::min(kd, t + half - j);
            for (int k = k0; k < k1; ++k) gxi[j + k - half] += wi[k] * gi[j];
          }
        }
        accumulate_grad(xn, gx.data(), static_cast<int64_t>(gx.size()), sink);
      }
      if (wn->requires_grad) {
        std::vector<double> gw(wn->data.size(), 0.0);
        for (int i = 0; i < c; ++i) {
          const double* xi = xn->data.data() + static_cast<size_t>(i) * t;
          const double* gi = go + static_cast<size_t>(i) * t;
          double* gwi = gw.data() + static_cast<size_t>(i) * kd;
          for (int j = 0; j < t; ++j) {
            int k0 = std::max(0, half - j), k1 = std::min(kd, t + half - j);
            for (int k = k0; k < k1; ++k) gwi[k] += xi[j + k - half] * gi[j];
          }
        }
        accumulate_grad(wn, gw.data(), static_cast<int64_t>(gw.size()), sink);
      }
    });
  }
  return Tensor::from_node(out);
}

// ------------------------------------------------------- softmax / layernorm

namespace {

// Iterate a tensor as independent lanes along `axis`: `outer` blocks of
// `extent` elements spaced by `inner`.
struct AxisView {
  int64_t outer, extent, inner;
};

AxisView axis_view(const Shape& s, int axis) {
  AVFS_CHECK(axis >= 0 && axis < static_cast<int>(s.size()),
             "axis ", axis, " out of range for ", shape_str(s));
  AxisView v{1, s[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) v.outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

void softmax_lane(const double* in, double* out, int64_t extent, int64_t stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < extent; ++i) mx = std::max(mx, in[i * stride]);
  double sum = 0.0;
  for (int64_t i = 0; i < extent; ++i) {
    double e = std::exp(in[i * stride] - mx);
    out[i * stride] = e;
    sum += e;
  }
  double inv = 1.0 / sum;
  for (int64_t i = 0; i < extent; ++i) out[i * stride] *= inv;
}

// In-place row softmax for an [m, n] contiguous buffer.
void softmax_rows_inplace(double* a, int m, int n) {
  for (int i = 0; i < m; ++i) softmax_lane(a + static_cast<size_t>(i) * n, a + static_cast<size_t>(i) * n, n, 1);
}

// dS = P ⊙ (dP − rowsum(dP ⊙ P)) for an [m, n] buffer; result in dp.
void softmax_rows_backward(const double* p, double* dp, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const double* pi = p + static_cast<size_t>(i) * n;
    double* di = dp + static_cast<size_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += di[j] * pi[j];
    for (int j = 0; j < n; ++j) di[j] = pi[j] * (di[j] - acc);
  }
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  AxisView v = axis_view(x.shape(), axis);
  bool track = want_grad(x);
  auto out = make_node(x.shape(), track);
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.inner; ++i) {
      int64_t base = o * v.extent * v.inner + i;
      softmax_lane(x.data() + base, out->data.data() + base, v.extent, v.inner);
    }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("softmax", out, [xn, out, v](GradMap* sink) {
      std::vector<double> g(out->grad.begin(), out->grad.end());
      for (int64_t o = 0; o < v.outer; ++o)
        for (int64_t i = 0; i < v.inner; ++i) {
          int64_t base = o * v.extent * v.inner + i;
          const double* p = out->data.data() + base;
          double* dp = g.data() + base;
          double acc = 0.0;
          for (int64_t e = 0; e < v.extent; ++e) acc += dp[e * v.inner] * p[e * v.inner];
          for (int64_t e = 0; e < v.extent; ++e)
            dp[e * v.inner] = p[e * v.inner] * (dp[e * v.inner] - acc);
        }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  AVFS_CHECK(x.ndim() == 2, "layer_norm: need 2-D, got ", shape_str(x.shape()));
  int d = x.dim(0), l = x.dim(1);
  AVFS_CHECK(gamma.ndim() == 1 && gamma.dim(0) == d && beta.ndim() == 1 &&
                 beta.dim(0) == d,
             "layer_norm: affine params must be [", d, "]");
  AVFS_CHECK(eps > 0.0, "layer_norm: eps must be positive");
  bool track = want_grad(x, gamma, beta);
  auto out = make_node(x.shape(), track);
  // per-column stats over the D rows
  std::vector<double> inv_sigma(static_cast<size_t>(l)), mean(static_cast<size_t>(l));
  for (int j = 0; j < l; ++j) {
    double m = 0.0;
    for (int i = 0; i < d; ++i) m += x.data()[static_cast<size_t>(i) * l + j];
    m /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      double c = x.data()[static_cast<size_t>(i) * l + j] - m;
      var += c * c;
    }
    var /= d;
    mean[static_cast<size_t>(j)] = m;
    inv_sigma[static_cast<size_t>(j)] = 1.0 / std::sqrt(var + eps);
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < l; ++j) {
      double xh = (x.data()[static_cast<size_t>(i) * l + j] - mean[static_cast<size_t>(j)]) * inv_sigma[static_cast<size_t>(j)];
      out->data[static_cast<size_t>(i) * l + j] = gamma.data()[i] * xh + beta.data()[i];
    }
  if (track) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    Tape::current()->record("layer_norm", out, [xn, gn, bn, out, d, l, mean, inv_sigma](GradMap* sink) {
      const double* go = out->grad.data();
      std::vector<double> ggamma(static_cast<size_t>(d), 0.0), gbeta(static_cast<size_t>(d), 0.0);
      std::vector<double> gx(xn->requires_grad ? xn->data.size() : 0);
      for (int j = 0; j < l; ++j) {
        double m = mean[static_cast<size_t>(j)], is = inv_sigma[static_cast<size_t>(j)];
        // dxh = go * gamma; need mean(dxh) and mean(dxh * xh) per column
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < d; ++i) {
          double xh = (xn->data[static_cast<size_t>(i) * l + j] - m) * is;
          double dxh = go[static_cast<size_t>(i) * l + j] * gn->data[static_cast<size_t>(i)];
          s1 += dxh;
          s2 += dxh * xh;
          ggamma[static_cast<size_t>(i)] += go[static_cast<size_t>(i) * l + j] * xh;
          gbeta[static_cast<size_t>(i)] += go[static_cast<size_t>(i) * l + j];
        }
        if (xn->requires_grad) {
          s1 /= d;
          s2 /= d;
          for (int i = 0; i < d; ++i) {
            double xh = (xn->data[static_cast<size_t>(i) * l + j] - m) * is;
            double dxh = go[static_cast<size_t>(i) * l + j] * gn->data[static_cast<size_t>(i)];
            gx[static_cast<size_t>(i) * l + j] = is * (dxh - s1 - xh * s2);
          }
        }
      }
      if (xn->requires_grad)
        accumulate_grad(xn, gx.data(), static_cast<int64_t>(gx.size()), sink);
      accumulate_grad(gn, ggamma.data(), d, sink);
      accumulate_grad(bn, gbeta.data(), d, sink);
    });
  }
  return Tensor::from_node(out);
}

// ------------------------------------------------------- fused attention

namespace {

struct AttnDims {
  int d_model, heads, dh, lq, lk;
};

AttnDims attn_dims(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  AVFS_CHECK(q.ndim() == 2 && k.ndim() == 2 && v.ndim() == 2,
             "attention: 2-D operands required");
  AttnDims d{};
  d.d_model = q.dim(0);
  d.lq = q.dim(1);
  d.lk = k.dim(1);
  AVFS_CHECK(k.dim(0) == d.d_model && v.dim(0) == d.d_model,
             "attention: feature dims disagree: q ", shape_str(q.shape()),
             " k ", shape_str(k.shape()), " v ", shape_str(v.shape()));
  AVFS_CHECK(v.dim(1) == d.lk, "attention: k/v length mismatch");
  if (d.d_model % heads != 0)
    throw ConfigError(str_cat("attention: feature dim ", d.d_model,
                              " not divisible by ", heads, " heads"));
  d.heads = heads;
  d.dh = d.d_model / heads;
  return d;
}

}  // namespace

Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           int heads, double scale) {
  AttnDims dm = attn_dims(q, k, v, heads);
  bool track = want_grad(q, k, v);
  auto out = make_node({dm.d_model, dm.lq}, track);
  std::vector<double> probs(static_cast<size_t>(dm.lq) * dm.lk);
  for (int h = 0; h < dm.heads; ++h) {
    const double* qh = q.data() + static_cast<size_t>(h) * dm.dh * dm.lq;
    const double* kh = k.data() + static_cast<size_t>(h) * dm.dh * dm.lk;
    const double* vh = v.data() + static_cast<size_t>(h) * dm.dh * dm.lk;
    double* oh = out->data.data() + static_cast<size_t>(h) * dm.dh * dm.lq;
    gemm(true, false, dm.lq, dm.lk, dm.dh, scale, qh, dm.lq, kh, dm.lk, 0.0,
         probs.data(), dm.lk);
    softmax_rows_inplace(probs.data(), dm.lq, dm.lk);
    gemm(false, true, dm.dh, dm.lq, dm.lk, 1.0, vh, dm.lk, probs.data(), dm.lk,
         0.0, oh, dm.lq);
  }
  if (track) {
    auto qn = q.node(), kn = k.node(), vn = v.node();
    Tape::current()->record("multihead_attention", out, [qn, kn, vn, out, dm, scale](GradMap* sink) {
      const double* go = out->grad.data();
      std::vector<double> gq(qn->requires_grad ? qn->data.size() : 0, 0.0);
      std::vector<double> gk(kn->requires_grad ? kn->data.size() : 0, 0.0);
      std::vector<double> gv(vn->requires_grad ? vn->data.size() : 0, 0.0);
      std::vector<double> probs(static_cast<size_t>(dm.lq) * dm.lk);
      std::vector<double> dp(probs.size());
      for (int h = 0; h < dm.heads; ++h) {
        const double* qh = qn->data.data() + static_cast<size_t>(h) * dm.dh * dm.lq;
        const double* kh = kn->data.data() + static_cast<size_t>(h) * dm.dh * dm.lk;
        const double* vh = vn->data.data() + static_cast<size_t>(h) * dm.dh * dm.lk;
        const double* goh = go + static_cast<size_t>(h) * dm.dh * dm.lq;
        // recompute probabilities
        gemm(true, false, dm.lq, dm.lk, dm.dh, scale, qh, dm.lq, kh, dm.lk,
             0.0, probs.data(), dm.lk);
        softmax_rows_inplace(probs.data(), dm.lq, dm.lk);
        if (vn->requires_grad) {
          // dV_h = dO_h · P
          gemm(false, false, dm.dh, dm.lk, dm.lq, 1.0, goh, dm.lq, probs.data(),
               dm.lk, 1.0, gv.data() + static_cast<size_t>(h) * dm.dh * dm.lk, dm.lk);
        }
        // dP = dO_h^T · V_h
        gemm(true, false, dm.lq, dm.lk, dm.dh, 1.0, goh, dm.lq, vh, dm.lk, 0.0,
             dp.data(), dm.lk);
        softmax_rows_backward(probs.data(), dp.data(), dm.lq, dm.lk);
        if (qn->requires_grad) {
          // dQ_h = scale · K_h · dS^T
          gemm(false, true, dm.dh, dm.lq, dm.lk, scale, kh, dm.lk, dp.data(),
               dm.lk, 1.0, gq.data() + static_cast<size_t>(h) * dm.dh * dm.lq, dm.lq);
        }
        if (kn->requires_grad) {
          // dK_h = scale · Q_h · dS
          gemm(false, false, dm.dh, dm.lk, dm.lq, scale, qh, dm.lq, dp.data(),
               dm.lk, 1.0, gk.data() + static_cast<size_t>(h) * dm.dh * dm.lk, dm.lk);
        }
      }
      if (qn->requires_grad) accumulate_grad(qn, gq.data(), static_cast<int64_t>(gq.size()), sink);
      if (kn->requires_grad) accumulate_grad(kn, gk.data(), static_cast<int64_t>(gk.size()), sink);
      if (vn->requires_grad) accumulate_grad(vn, gv.data(), static_cast<int64_t>(gv.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor attention_probs(const Tensor& q, const Tensor& k, int heads,
                       double scale, int head) {
  AVFS_CHECK(head >= 0 && head < heads, "attention_probs: bad head index");
  AttnDims dm = attn_dims(q, k, k, heads);
  Tensor probs({dm.lq, dm.lk});
  const double* qh = q.data() + static_cast<size_t>(head) * dm.dh * dm.lq;
  const double* kh = k.data() + static_cast<size_t>(head) * dm.dh * dm.lk;
  gemm(true, false, dm.lq, dm.lk, dm.dh, scale, qh, dm.lq, kh, dm.lk, 0.0,
       probs.data(), dm.lk);
  softmax_rows_inplace(probs.data(), dm.lq, dm.lk);
  return probs;
}

// ---------------------------------------------------------------- chunking

Tensor chunk(const Tensor& x, int C, ChunkInfo* info) {
  AVFS_CHECK(x.ndim() == 2, "chunk: need 2-D, got ", shape_str(x.shape()));
  if (C < 2 || C % 2 != 0)
    throw ConfigError(str_cat("chunk: C must be even and >= 2, got ", C));
  int d = x.dim(0), l = x.dim(1);
  int hop = C / 2;
  int pad_front = hop;
  int eff = pad_front + l;
  int pad_back = eff < C ? C - eff : (hop - (eff - C) % hop) % hop;
  int lpad = eff + pad_back;
  int n_chunks = (lpad - C) / hop + 1;
  ChunkInfo ci{C, hop, pad_front, pad_back, n_chunks, l};
  if (info) *info = ci;
  bool track = want_grad(x);
  auto out = make_node({d, n_chunks * C}, track);
  std::fill(out->data.begin(), out->data.end(), 0.0);
  for (int r = 0; r < d; ++r) {
    const double* src = x.data() + static_cast<size_t>(r) * l;
    double* dst = out->data.data() + static_cast<size_t>(r) * n_chunks * C;
    for (int i = 0; i < n_chunks; ++i)
      for (int c = 0; c < C; ++c) {
        int p = i * hop + c - pad_front;  // position in the original signal
        if (p >= 0 && p < l) dst[i * C + c] = src[p];
      }
  }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("chunk", out, [xn, out, ci, d](GradMap* sink) {
      int l = ci.orig_len;
      std::vector<double> g(static_cast<size_t>(d) * l, 0.0);
      for (int r = 0; r < d; ++r) {
        const double* go = out->grad.data() + static_cast<size_t>(r) * ci.n_chunks * ci.chunk;
        double* gx = g.data() + static_cast<size_t>(r) * l;
        for (int i = 0; i < ci.n_chunks; ++i)
          for (int c = 0; c < ci.chunk; ++c) {
            int p = i * ci.hop + c - ci.pad_front;
            if (p >= 0 && p < l) gx[p] += go[i * ci.chunk + c];
          }
      }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

Tensor overlap_add(const Tensor& x, const ChunkInfo& ci) {
  AVFS_CHECK(x.ndim() == 2, "overlap_add: need 2-D");
  int d = x.dim(0);
  if (x.dim(1) != ci.n_chunks * ci.chunk)
    throw ContractError(str_cat("overlap_add: tensor width ", x.dim(1),
                                " inconsistent with metadata I*C = ",
                                ci.n_chunks * ci.chunk));
  int l = ci.orig_len;
  int lpad = ci.pad_front + l + ci.pad_back;
  // contribution count per padded position
  std::vector<double> inv_count(static_cast<size_t>(lpad), 0.0);
  for (int i = 0; i < ci.n_chunks; ++i)
    for (int c = 0; c < ci.chunk; ++c) inv_count[static_cast<size_t>(i) * ci.hop + c] += 1.0;
  for (auto& v : inv_count) v = v > 0.0 ? 1.0 / v : 0.0;
  bool track = want_grad(x);
  auto out = make_node({d, l}, track);
  std::fill(out->data.begin(), out->data.end(), 0.0);
  for (int r = 0; r < d; ++r) {
    const double* src = x.data() + static_cast<size_t>(r) * ci.n_chunks * ci.chunk;
    double* dst = out->data.data() + static_cast<size_t>(r) * l;
    for (int i = 0; i < ci.n_chunks; ++i)
      for (int c = 0; c < ci.chunk; ++c) {
        int p = i * ci.hop + c - ci.pad_front;
        if (p >= 0 && p < l)
          dst[p] += src[i * ci.chunk + c] * inv_count[static_cast<size_t>(i * ci.hop + c)];
      }
  }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("overlap_add", out, [xn, out, ci, d, inv_count](GradMap* sink) {
      int l = ci.orig_len;
      std::vector<double> g(xn->data.size(), 0.0);
      for (int r = 0; r < d; ++r) {
        const double* go = out->grad.data() + static_cast<size_t>(r) * l;
        double* gx = g.data() + static_cast<size_t>(r) * ci.n_chunks * ci.chunk;
        for (int i = 0; i < ci.n_chunks; ++i)
          for (int c = 0; c < ci.chunk; ++c) {
            int p = i * ci.hop + c - ci.pad_front;
            if (p >= 0 && p < l)
              gx[i * ci.chunk + c] = go[p] * inv_count[static_cast<size_t>(i * ci.hop + c)];
          }
      }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

// ---------------------------------------------------------------- pooling

Tensor maxpool_cols(const Tensor& x, int window, int stride) {
  AVFS_CHECK(x.ndim() == 2 && window >= 1 && stride >= 1, "maxpool_cols: bad args");
  int r = x.dim(0), t = x.dim(1);
  if (t < window)
    throw ShapeError(str_cat("maxpool_cols: input too short: T=", t,
                             " < window ", window));
  int l = (t - window) / stride + 1;
  bool track = want_grad(x);
  auto out = make_node({r, l}, track);
  std::vector<int> argmax(static_cast<size_t>(r) * l);
  for (int i = 0; i < r; ++i) {
    const double* xi = x.data() + static_cast<size_t>(i) * t;
    for (int j = 0; j < l; ++j) {
      int best = j * stride;
      for (int k = 1; k < window; ++k)
        if (xi[j * stride + k] > xi[best]) best = j * stride + k;
      out->data[static_cast<size_t>(i) * l + j] = xi[best];
      argmax[static_cast<size_t>(i) * l + j] = best;
    }
  }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("maxpool_cols", out, [xn, out, argmax, r, t, l](GradMap* sink) {
      std::vector<double> g(xn->data.size(), 0.0);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < l; ++j)
          g[static_cast<size_t>(i) * t + argmax[static_cast<size_t>(i) * l + j]] +=
              out->grad[static_cast<size_t>(i) * l + j];
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(out);
}

}  // namespace avfs

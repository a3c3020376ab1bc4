// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_TESTS_TEST_SUPPORT_H_
#define AVFS_TESTS_TEST_SUPPORT_H_

#include <cmath>
#include <functional>
#include <vector>

#include "avfs/autograd.h"
#include "avfs/ops.h"
#include "avfs/tensor.h"

namespace avfs::test {

// Central finite differences vs analytic gradient for every element of every
// tensor in `params`. `f` must rebuild the graph from current param values and
// return a scalar loss. Returns the worst relative error.
inline double gradcheck(const std::function<Tensor()>& f,
                        std::vector<Tensor> params, double step = 1e-5) {
  for (auto& p : params) p.set_requires_grad(true);
  GradMap grads;
  {
    Tape tape;
    Tensor loss = f();
    tape.backward(loss, &grads);
  }
  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double>* g = grads.find(p.node().get());
    for (int64_t i = 0; i < p.numel(); ++i) {
      double saved = p.data()[i];
      p.data()[i] = saved + step;
      double up = f().item();
      p.data()[i] = saved - step;
      double down = f().item();
      p.data()[i] = saved;
      double fd = (up - down) / (2.0 * step);
      double an = g ? (*g)[static_cast<size_t>(i)] : 0.0;
      double denom = std::max({std::fabs(fd), std::fabs(an), 1e-4});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
  }
  return worst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// ---- independent oracles (plain loops, no engine code paths) ----

// Triple-loop matrix product.
inline std::vector<double> matmul_oracle(const std::vector<double>& a,
                                         const std::vector<double>& b, int m,
                                         int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        c[static_cast<size_t>(i) * n + j] +=
            a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];
  return c;
}

// Nested-sum valid convolution: x[Ci,T], w[Co,Ci,K].
inline std::vector<double> conv1d_oracle(const std::vector<double>& x,
                                         const std::vector<double>& w, int ci,
                                         int t, int co, int k, int stride) {
  int l = (t - k) / stride + 1;
  std::vector<double> y(static_cast<size_t>(co) * l, 0.0);
  for (int c = 0; c < co; ++c)
    for (int j = 0; j < l; ++j)
      for (int i = 0; i < ci; ++i)
        for (int kk = 0; kk < k; ++kk)
          y[static_cast<size_t>(c) * l + j] +=
              x[static_cast<size_t>(i) * t + j * stride + kk] *
              w[(static_cast<size_t>(c) * ci + i) * k + kk];
  return y;
}

// Per-channel same-padded convolution.
inline std::vector<double> depthwise_oracle(const std::vector<double>& x,
                                            const std::vector<double>& w,
                                            int c, int t, int kd) {
  int half = kd / 2;
  std::vector<double> y(static_cast<size_t>(c) * t, 0.0);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < t; ++j)
      for (int k = 0; k < kd; ++k) {
        int p = j + k - half;
        if (p >= 0 && p < t)
          y[static_cast<size_t>(i) * t + j] +=
              x[static_cast<size_t>(i) * t + p] * w[static_cast<size_t>(i) * kd + k];
      }
  return y;
}

// Two-pass mean/variance layer norm over a vector.
inline std::vector<double> layer_norm_oracle(const std::vector<double>& x,
                                             const std::vector<double>& gamma,
                                             const std::vector<double>& beta,
                                             double eps) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - m) * (v - m);
  var /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    y[i] = gamma[i] * (x[i] - m) / std::sqrt(var + eps) + beta[i];
  return y;
}

// Single-query-loop scaled dot-product attention, one head at a time.
// q,k,v are [d, l*] feature-major like the engine's layout.
inline std::vector<double> attention_oracle(const std::vector<double>& q,
                                            const std::vector<double>& k,
                                            const std::vector<double>& v,
                                            int d_model, int heads, int lq,
                                            int lk, double sc) {
  int dh = d_model / heads;
  std::vector<double> out(static_cast<size_t>(d_model) * lq, 0.0);
  for (int h = 0; h < heads; ++h) {
    for (int a = 0; a < lq; ++a) {
      std::vector<double> scores(static_cast<size_t>(lk), 0.0);
      for (int b = 0; b < lk; ++b)
        for (int e = 0; e < dh; ++e)
          scores[static_cast<size_t>(b)] += q[(static_cast<size_t>(h) * dh + e) * lq + a] *
                                            k[(static_cast<size_t>(h) * dh + e) * lk + b] * sc;
      double mx = scores[0];
      for (double s : scores) mx = std::max(mx, s);
      double z = 0.0;
      for (auto& s : scores) {
        s = std::exp(s - mx);
        z += s;
      }
      for (auto& s : scores) s /= z;
      for (int e = 0; e < dh; ++e)
        for (int b = 0; b < lk; ++b)
          out[(static_cast<size_t>(h) * dh + e) * lq + a] +=
              scores[static_cast<size_t>(b)] * v[(static_cast<size_t>(h) * dh + e) * lk + b];
    }
  }
  return out;
}

}  // namespace avfs::test

#endif  // AVFS_TESTS_TEST_SUPPORT_H_

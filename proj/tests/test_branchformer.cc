// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "avfs/branchformer.h"
#include "avfs/ops.h"
#include "doctest.h"
#include "test_support.h"

using namespace avfs;
using namespace avfs::test;

namespace {

BranchformerConfig small_cfg() {
  BranchformerConfig c;
  c.dim = 4;
  c.heads = 2;
  c.hidden = 8;
  c.csgu_kernel = 3;
  c.n_blocks = 1;
  return c;
}

// gelu for oracle chains, erf from libm but applied by plain loops
std::vector<double> gelu_oracle(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] / std::sqrt(2.0)));
  return y;
}

// per-column layer norm oracle over a [d, l] buffer
std::vector<double> ln_cols_oracle(const std::vector<double>& x, int d, int l,
                                   const std::vector<double>& g,
                                   const std::vector<double>& b) {
  std::vector<double> y(x.size());
  for (int j = 0; j < l; ++j) {
    std::vector<double> col(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) col[static_cast<size_t>(i)] = x[static_cast<size_t>(i) * l + j];
    auto n = layer_norm_oracle(col, g, b, 1e-5);
    for (int i = 0; i < d; ++i) y[static_cast<size_t>(i) * l + j] = n[static_cast<size_t>(i)];
  }
  return y;
}

std::vector<double> linear_oracle(const std::vector<double>& w,
                                  const std::vector<double>& bias,
                                  const std::vector<double>& x, int out,
                                  int in, int l) {
  auto y = matmul_oracle(w, x, out, in, l);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < l; ++j) y[static_cast<size_t>(i) * l + j] += bias[static_cast<size_t>(i)];
  return y;
}

}  // namespace

TEST_CASE("mhsa_branch single-key attention at L=1") {
  auto cfg = small_cfg();
  Rng rng(5);
  MhsaBranch br(cfg.dim, cfg.heads, rng);
  Rng d(6);
  Tensor x = Tensor::randn({cfg.dim, 1}, d);
  Tensor got = br.apply(x);
  // softmax over one key is weight 1, so attention returns V; the branch
  // output is the output projection of V.
  Tensor h = br.ln.apply(x);
  Tensor v = br.attn.wv.apply(h);
  Tensor want = br.attn.wo.apply(v);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("mhsa_branch attention rows sum to one") {
  auto cfg = small_cfg();
  Rng rng(7);
  MhsaBranch br(cfg.dim, cfg.heads, rng);
  Rng d(8);
  Tensor x = Tensor::randn({cfg.dim, 6}, d);
  Tensor h = br.ln.apply(x);
  Tensor q = br.attn.wq.apply(h), k = br.attn.wk.apply(h);
  double sc = 1.0 / std::sqrt(static_cast<double>(cfg.dim) / cfg.heads);
  for (int head = 0; head < cfg.heads; ++head) {
    Tensor p = attention_probs(q, k, cfg.heads, sc, head);
    for (int i = 0; i < p.dim(0); ++i) {
      double s = 0.0;
      for (int j = 0; j < p.dim(1); ++j) s += p.at(i, j);
      CHECK(std::fabs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("mhsa_branch vs naive oracle, 2 heads D=4 L=3") {
  auto cfg = small_cfg();
  Rng rng(9);
  MhsaBranch br(cfg.dim, cfg.heads, rng);
  Rng d(10);
  Tensor x = Tensor::randn({cfg.dim, 3}, d);
  Tensor got = br.apply(x);

  int D = cfg.dim, L = 3;
  auto h = ln_cols_oracle(x.vec(), D, L, br.ln.gamma.vec(), br.ln.beta.vec());
  auto q = linear_oracle(br.attn.wq.w.vec(), br.attn.wq.b.vec(), h, D, D, L);
  auto k = linear_oracle(br.attn.wk.w.vec(), br.attn.wk.b.vec(), h, D, D, L);
  auto v = linear_oracle(br.attn.wv.w.vec(), br.attn.wv.b.vec(), h, D, D, L);
  double sc = 1.0 / std::sqrt(static_cast<double>(D) / cfg.heads);
  auto att = attention_oracle(q, k, v, D, cfg.heads, L, L, sc);
  auto want = linear_oracle(br.attn.wo.w.vec(), br.attn.wo.b.vec(), att, D, D, L);
  CHECK(max_abs_diff(got.vec(), want) < 1e-10);
}

TEST_CASE("csgu zero gate on constant second half") {
  auto cfg = small_cfg();
  Rng rng(11);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  int dh = cfg.hidden;
  Tensor hz({dh, 5});
  Rng d(12);
  for (int i = 0; i < dh / 2; ++i)
    for (int j = 0; j < 5; ++j) hz.data()[i * 5 + j] = d.normal();
  for (int i = dh / 2; i < dh; ++i)
    for (int j = 0; j < 5; ++j) hz.data()[i * 5 + j] = 0.75;  // constant
  Tensor out = br.csgu(hz);
  CHECK(out.shape() == Shape{dh / 2, 5});
  // constant columns normalize to zero; with zero conv bias the gate is zero
  for (int64_t i = 0; i < out.numel(); ++i)
    CHECK(std::fabs(out.data()[i]) < 1e-9);
}

TEST_CASE("csgu identity gate: unit bias, zero kernel") {
  auto cfg = small_cfg();
  Rng rng(13);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  std::fill(br.dw_kernel.vec().begin(), br.dw_kernel.vec().end(), 0.0);
  std::fill(br.dw_bias.vec().begin(), br.dw_bias.vec().end(), 1.0);
  Rng d(14);
  Tensor hz = Tensor::randn({cfg.hidden, 4}, d);
  Tensor out = br.csgu(hz);
  Tensor h1 = rows(hz, 0, cfg.hidden / 2);
  CHECK(max_abs_diff(out, h1) == 0.0);
}

TEST_CASE("csgu odd split dimension is rejected") {
  auto cfg = small_cfg();
  Rng rng(15);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  Tensor odd({5, 3}, 0.1);
  CHECK_THROWS_AS(br.csgu(odd), ConfigError);
}

TEST_CASE("csgu vs composition of oracles") {
  auto cfg = small_cfg();
  Rng rng(17);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  Rng d(18);
  int dh = cfg.hidden, l = 6, half = dh / 2;
  Tensor hz = Tensor::randn({dh, l}, d);
  Tensor got = br.csgu(hz);

  std::vector<double> h1(hz.data(), hz.data() + half * l);
  std::vector<double> h2(hz.data() + half * l, hz.data() + dh * l);
  auto normed = ln_cols_oracle(h2, half, l, br.ln_gate.gamma.vec(), br.ln_gate.beta.vec());
  auto conved = depthwise_oracle(normed, br.dw_kernel.vec(), half, l, cfg.csgu_kernel);
  for (int i = 0; i < half; ++i)
    for (int j = 0; j < l; ++j) conved[static_cast<size_t>(i) * l + j] += br.dw_bias.vec()[static_cast<size_t>(i)];
  std::vector<double> want(static_cast<size_t>(half) * l);
  for (size_t i = 0; i < want.size(); ++i) want[i] = h1[i] * conved[i];
  CHECK(max_abs_diff(got.vec(), want) < 1e-10);
}

TEST_CASE("cgmlp_branch zero input with zero biases gives zero output") {
  auto cfg = small_cfg();
  Rng rng(19);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  Tensor x = Tensor::zeros({cfg.dim, 5});
  Tensor out = br.apply(x);
  for (int64_t i = 0; i < out.numel(); ++i)
    CHECK(std::fabs(out.data()[i]) < 1e-12);
}

TEST_CASE("cgmlp_branch preserves shape (D=8, D_hidden=32, L=5)") {
  BranchformerConfig cfg;
  cfg.dim = 8;
  cfg.hidden = 32;
  cfg.csgu_kernel = 3;
  Rng rng(21);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  Rng d(22);
  Tensor x = Tensor::randn({8, 5}, d);
  CHECK(br.apply(x).shape() == Shape{8, 5});
}

TEST_CASE("cgmlp_branch vs step-by-step oracle chain") {
  auto cfg = small_cfg();
  Rng rng(23);
  CgMlpBranch br(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng);
  Rng d(24);
  int D = cfg.dim, l = 5, dh = cfg.hidden, half = dh / 2;
  Tensor x = Tensor::randn({D, l}, d);
  Tensor got = br.apply(x);

  auto pre = ln_cols_oracle(x.vec(), D, l, br.ln_pre.gamma.vec(), br.ln_pre.beta.vec());
  auto up = gelu_oracle(linear_oracle(br.up.w.vec(), br.up.b.vec(), pre, dh, D, l));
  std::vector<double> h1(up.begin(), up.begin() + half * l);
  std::vector<double> h2(up.begin() + half * l, up.end());
  auto normed = ln_cols_oracle(h2, half, l, br.ln_gate.gamma.vec(), br.ln_gate.beta.vec());
  auto gate = depthwise_oracle(normed, br.dw_kernel.vec(), half, l, cfg.csgu_kernel);
  for (int i = 0; i < half; ++i)
    for (int j = 0; j < l; ++j) gate[static_cast<size_t>(i) * l + j] += br.dw_bias.vec()[static_cast<size_t>(i)];
  std::vector<double> gated(static_cast<size_t>(half) * l);
  for (size_t i = 0; i < gated.size(); ++i) gated[i] = h1[i] * gate[i];
  auto want = linear_oracle(br.down.w.vec(), br.down.b.vec(), gated, D, half, l);
  CHECK(max_abs_diff(got.vec(), want) < 1e-9);
}

TEST_CASE("merge boundaries: alpha pinned to 1 and 0 are exact") {
  auto cfg = small_cfg();
  Rng d(26);
  Tensor x = Tensor::randn({cfg.dim, 5}, d);
  {
    auto c1 = cfg;
    c1.alpha_debug = 1;
    Rng rng(25);
    BranchformerBlock blk(c1, rng);
    Tensor got = blk.apply(x);
    Tensor want = add(x, blk.mhsa.apply(x));
    CHECK(max_abs_diff(got, want) == 0.0);
    CHECK(blk.alpha_value() == 1.0);
  }
  {
    auto c0 = cfg;
    c0.alpha_debug = 0;
    Rng rng(25);
    BranchformerBlock blk(c0, rng);
    Tensor got = blk.apply(x);
    Tensor want = add(x, blk.cgmlp.apply(x));
    CHECK(max_abs_diff(got, want) == 0.0);
  }
}

TEST_CASE("merge at alpha=0.5 equals weighted-sum oracle") {
  auto cfg = small_cfg();
  Rng rng(27);
  BranchformerBlock blk(cfg, rng);
  CHECK(blk.alpha_value() == doctest::Approx(0.5));  // zero logit
  Rng d(28);
  Tensor x = Tensor::randn({cfg.dim, 5}, d);
  Tensor got = blk.apply(x);
  Tensor a = blk.mhsa.apply(x), b = blk.cgmlp.apply(x);
  for (int64_t i = 0; i < got.numel(); ++i) {
    double want = x.data()[i] + 0.5 * a.data()[i] + 0.5 * b.data()[i];
    CHECK(std::fabs(got.data()[i] - want) < 1e-10);
  }
}

TEST_CASE("merge convexity for arbitrary trained alpha") {
  auto cfg = small_cfg();
  Rng rng(29);
  BranchformerBlock blk(cfg, rng);
  blk.alpha_logit.data()[0] = 0.83;  // some mid-training value
  double alpha = blk.alpha_value();
  CHECK(alpha > 0.0);
  CHECK(alpha < 1.0);
  Rng d(30);
  Tensor x = Tensor::randn({cfg.dim, 5}, d);
  Tensor got = blk.apply(x);
  Tensor a = blk.mhsa.apply(x), b = blk.cgmlp.apply(x);
  for (int64_t i = 0; i < got.numel(); ++i) {
    double want = x.data()[i] + alpha * a.data()[i] + (1 - alpha) * b.data()[i];
    CHECK(std::fabs(got.data()[i] - want) < 1e-10);
  }
}

TEST_CASE("encoder preserves shape for stacked blocks") {
  for (int blocks : {1, 2, 3}) {
    auto cfg = small_cfg();
    cfg.n_blocks = blocks;
    Rng rng(31);
    BranchformerEncoder enc(cfg, rng);
    Rng d(32);
    Tensor x = Tensor::randn({cfg.dim, 7}, d);
    CHECK(enc.encode(x).shape() == x.shape());
  }
}

TEST_CASE("gradient flows to alpha_logit") {
  auto cfg = small_cfg();
  Rng rng(33);
  BranchformerBlock blk(cfg, rng);
  Rng d(34);
  Tensor x = Tensor::randn({cfg.dim, 4}, d);
  Tape tape;
  Tensor out = blk.apply(x);
  // a target correlated with one branch makes the merge weight matter
  Tensor target = blk.mhsa.apply(x);
  Tensor diff = sub(out, target);
  tape.backward(sum_all(mul(diff, diff)));
  CHECK(blk.alpha_logit.has_grad());
  CHECK(std::fabs(blk.alpha_logit.grad()[0]) > 0.0);
}

TEST_CASE("branchformer block gradient check") {
  auto cfg = small_cfg();
  Rng rng(35);
  BranchformerBlock blk(cfg, rng);
  Rng d(36);
  Tensor x = Tensor::randn({cfg.dim, 3}, d);
  ParamList params;
  blk.collect("blk", &params);
  std::vector<Tensor> ts;
  for (auto& p : params) ts.push_back(p.tensor);
  double err = gradcheck(
      [&] {
        Tensor y = blk.apply(x);
        return sum_all(mul(y, y));
      },
      ts);
  CHECK(err < 1e-3);
}

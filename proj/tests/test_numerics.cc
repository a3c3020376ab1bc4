// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "avfs/nn.h"
#include "doctest.h"
#include "test_support.h"

using namespace avfs;
using namespace avfs::test;

namespace {

Tensor randt(Shape s, uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  return Tensor::randn(std::move(s), rng, sd);
}

// erf by Taylor series, independent of libm's erf.
double erf_series(double z) {
  double term = z, sum = z;
  for (int n = 1; n < 40; ++n) {
    term *= -z * z / n;
    sum += term / (2 * n + 1);
  }
  return sum * 2.0 / std::sqrt(3.14159265358979323846);
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor a({2, 2}, {3.5, -1.25, 2.0, 7.5});
  CHECK(max_abs_diff(matmul(eye, a), a) == 0.0);

  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor v({2, 1}, {1, 1});
  Tensor r = matmul(m, v);
  CHECK(r.at(0, 0) == 3.0);
  CHECK(r.at(1, 0) == 7.0);
}

TEST_CASE("matmul vs triple-loop oracle") {
  Tensor a = randt({3, 4}, 11), b = randt({4, 2}, 12);
  Tensor c = matmul(a, b);
  auto want = matmul_oracle(a.vec(), b.vec(), 3, 4, 2);
  CHECK(max_abs_diff(c.vec(), want) < 1e-12);
}

TEST_CASE("matmul transpose flags against plain layout") {
  Tensor a = randt({4, 3}, 21), b = randt({4, 2}, 22);
  // a^T (3x4) x b (4x2)
  Tensor r1 = matmul(a, b, true, false);
  Tensor r2 = matmul(transpose2d(a), b);
  CHECK(max_abs_diff(r1, r2) < 1e-13);
  Tensor c = randt({2, 4}, 23);
  Tensor r3 = matmul(a, c, true, true);  // 3x4 * 4x2
  Tensor r4 = matmul(transpose2d(a), transpose2d(c));
  CHECK(max_abs_diff(r3, r4) < 1e-13);
  Tensor d = randt({3, 4}, 24);
  Tensor r5 = matmul(d, c, false, true);
  Tensor r6 = matmul(d, transpose2d(c));
  CHECK(max_abs_diff(r5, r6) < 1e-13);
}

TEST_CASE("matmul shape errors carry shapes") {
  Tensor a({2, 3}), b({4, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), Error);
}

TEST_CASE("conv1d shape arithmetic and delta kernel") {
  Tensor x = randt({1, 32}, 31);
  Tensor w({1, 1, 16});
  CHECK(conv1d(x, w, 8).shape() == Shape{1, 3});

  Tensor wd({1, 1, 1}, {1.0});
  Tensor y = conv1d(x, wd, 1);
  CHECK(y.shape() == Shape{1, 32});
  CHECK(max_abs_diff(y, x) == 0.0);

  // delta kernel of width K picks the first T-K+1 samples
  Tensor wk({1, 1, 4});
  wk.data()[0] = 1.0;
  Tensor z = conv1d(x, wk, 1);
  CHECK(z.shape() == Shape{1, 29});
  for (int i = 0; i < 29; ++i) CHECK(z.data()[i] == x.data()[i]);
}

TEST_CASE("conv1d vs nested-sum oracle") {
  int ci = 3, t = 20, co = 4, k = 5, stride = 2;
  Tensor x = randt({ci, t}, 41), w = randt({co, ci, k}, 42);
  Tensor y = conv1d(x, w, stride);
  auto want = conv1d_oracle(x.vec(), w.vec(), ci, t, co, k, stride);
  CHECK(max_abs_diff(y.vec(), want) < 1e-12);
}

TEST_CASE("conv1d input too short") {
  Tensor x = randt({1, 8}, 51);
  Tensor w({2, 1, 16});
  CHECK_THROWS_WITH_AS(conv1d(x, w, 8), doctest::Contains("too short"),
                       ShapeError);
}

TEST_CASE("conv1d_transpose shapes and single-column case") {
  Tensor y = randt({2, 3}, 61);
  Tensor w = randt({2, 1, 16}, 62);
  CHECK(conv1d_transpose(y, w, 8).shape() == Shape{1, 32});

  // L=1: output is the kernel combination of one input column
  Tensor y1({2, 1}, {2.0, -3.0});
  Tensor o = conv1d_transpose(y1, w, 8);
  CHECK(o.shape() == Shape{1, 16});
  for (int k = 0; k < 16; ++k) {
    double want = 2.0 * w.data()[k] - 3.0 * w.data()[16 + k];
    CHECK(o.data()[k] == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("conv1d / conv1d_transpose adjoint identity") {
  // <conv(x,w,s), y> == <x, conv_transpose(y, w-as-[Co,Ci,K], s)>
  int ci = 3, t = 26, co = 2, k = 6, s = 4;
  Tensor x = randt({ci, t}, 71), w = randt({co, ci, k}, 72);
  Tensor y_probe = randt({co, (t - k) / s + 1}, 73);
  double lhs = dot(conv1d(x, w, s), y_probe).item();
  Tensor back = conv1d_transpose(y_probe, w, s);
  CHECK(back.shape() == Shape{ci, t});
  double rhs = dot(x, back).item();
  CHECK(std::fabs(lhs - rhs) < 1e-10);
}

TEST_CASE("depthwise_conv1d identity, constant, oracle, errors") {
  int c = 3, t = 12, kd = 5;
  Tensor x = randt({c, t}, 81);

  Tensor wdelta({c, kd});
  for (int i = 0; i < c; ++i) wdelta.data()[i * kd + kd / 2] = 1.0;
  CHECK(max_abs_diff(depthwise_conv1d(x, wdelta), x) == 0.0);

  Tensor xconst({c, t}, 2.5);
  Tensor w = randt({c, kd}, 82);
  Tensor y = depthwise_conv1d(xconst, w);
  for (int i = 0; i < c; ++i) {
    double sigma = 0.0;
    for (int k = 0; k < kd; ++k) sigma += w.data()[i * kd + k];
    // interior positions see the full kernel
    for (int j = kd / 2; j < t - kd / 2; ++j)
      CHECK(y.at(i, j) == doctest::Approx(2.5 * sigma).epsilon(1e-12));
  }

  auto want = depthwise_oracle(x.vec(), w.vec(), c, t, kd);
  CHECK(max_abs_diff(depthwise_conv1d(x, w).vec(), want) < 1e-12);

  Tensor weven({c, 4});
  CHECK_THROWS_AS(depthwise_conv1d(x, weven), ConfigError);
}

TEST_CASE("softmax closed forms, shift invariance, row sums") {
  Tensor x({2}, {0.0, 0.0});
  Tensor y = softmax(x, 0);
  CHECK(y.data()[0] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor x2({2}, {0.0, std::log(2.0)});
  Tensor y2 = softmax(x2, 0);
  CHECK(y2.data()[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(y2.data()[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));

  Tensor r = randt({4, 7}, 91);
  Tensor shifted = add_const(r, 17.25);
  CHECK(max_abs_diff(softmax(r, 1), softmax(shifted, 1)) < 1e-12);

  Tensor p = softmax(randt({5, 9}, 92, 30.0), 1);  // large magnitudes
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 9; ++j) s += p.at(i, j);
    CHECK(std::fabs(s - 1.0) < 1e-6);
  }
  // axis 0 lanes also normalize
  Tensor p0 = softmax(randt({5, 9}, 93), 0);
  for (int j = 0; j < 9; ++j) {
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += p0.at(i, j);
    CHECK(std::fabs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm closed forms and oracle") {
  int d = 6;
  Tensor g({d}, 1.0), b({d});
  Tensor xc({d, 1}, 3.7);
  Tensor y = layer_norm(xc, g, b);
  for (int i = 0; i < d; ++i) CHECK(std::fabs(y.data()[i]) < 1e-6);

  Tensor g2({2}, 1.0), b2({2});
  Tensor x2({2, 1}, {1.0, -1.0});
  Tensor y2 = layer_norm(x2, g2, b2);
  CHECK(y2.data()[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(y2.data()[1] == doctest::Approx(-1.0).epsilon(1e-3));

  Tensor xr = randt({d, 1}, 101);
  Tensor gr = randt({d}, 102), br = randt({d}, 103);
  Tensor yr = layer_norm(xr, gr, br, 1e-5);
  auto want = layer_norm_oracle(xr.vec(), gr.vec(), br.vec(), 1e-5);
  CHECK(max_abs_diff(yr.vec(), want) < 1e-10);
}

TEST_CASE("activations: symmetry points, asymptote, erf oracle") {
  Tensor z = Tensor::scalar(0.0);
  CHECK(gelu(z).item() == 0.0);
  CHECK(sigmoid(z).item() == 0.5);
  CHECK(gelu(Tensor::scalar(10.0)).item() == doctest::Approx(10.0).epsilon(1e-6));
  double want = 0.5 * (1.0 + erf_series(1.0 / std::sqrt(2.0)));
  CHECK(gelu(Tensor::scalar(1.0)).item() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("backward closed forms") {
  Tensor w = Tensor::scalar(3.0, true);
  {
    Tape tape;
    Tensor loss = mul(w, w);
    tape.backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
  }
  w.zero_grad();
  {
    Tape tape;
    Tensor x = randt({5}, 111);
    x.set_requires_grad(true);
    Tensor loss = sum_all(softmax(x, 0));
    tape.backward(loss);
    for (double g : x.grad()) CHECK(std::fabs(g) < 1e-12);
  }
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape tape;
  Tensor x = randt({3}, 121);
  x.set_requires_grad(true);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), Error);
}

TEST_CASE("gradient checks: every primitive vs central differences") {
  auto check = [](const char* name, std::function<Tensor()> f,
                  std::vector<Tensor> params) {
    double err = gradcheck(f, params);
    INFO(name);
    CHECK(err < 1e-3);
  };

  Tensor a = randt({3, 4}, 201), b = randt({3, 4}, 202, 0.7);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  check("add", [&] { return sum_all(mul(add(a, b), add(a, b))); }, {a, b});
  check("sub", [&] { return sum_all(mul(sub(a, b), sub(a, b))); }, {a, b});
  check("mul", [&] { return sum_all(mul(a, b)); }, {a, b});
  Tensor bpos = add_const(mul(b, b), 0.5);
  check("div", [&] { return sum_all(div(a, add_const(mul(b, b), 0.5))); }, {a, b});
  check("scale/add_const/neg",
        [&] { return sum_all(neg(add_const(scale(a, 1.7), 0.3))); }, {a});
  Tensor s = Tensor::scalar(0.8, true);
  check("mul_scalar", [&] { return sum_all(mul_scalar(a, s)); }, {a, s});
  check("relu", [&] { return sum_all(relu(a)); }, {a});
  check("gelu", [&] { return sum_all(gelu(a)); }, {a});
  check("sigmoid", [&] { return sum_all(sigmoid(a)); }, {a});
  check("exp", [&] { return sum_all(exp_(scale(a, 0.3))); }, {a});
  check("log", [&] { return sum_all(log_(add_const(mul(a, a), 0.9))); }, {a});
  check("sqrt", [&] { return sum_all(sqrt_(add_const(mul(a, a), 0.9))); }, {a});
  check("clamp", [&] { return sum_all(clamp(a, -0.9, 0.9)); }, {a});
  check("dot", [&] { return dot(a, b); }, {a, b});
  check("mean_all", [&] { return mean_all(mul(a, a)); }, {a});
  check("transpose2d", [&] { return sum_all(mul(transpose2d(a), transpose2d(a))); }, {a});
  check("rows", [&] { return sum_all(mul(rows(a, 1, 3), rows(a, 1, 3))); }, {a});
  check("cols", [&] { return sum_all(mul(cols(a, 1, 3), cols(a, 1, 3))); }, {a});
  check("concat_rows", [&] {
    Tensor c = concat_rows({a, b});
    return sum_all(mul(c, c));
  }, {a, b});
  check("concat_cols", [&] {
    Tensor c = concat_cols({a, b});
    return sum_all(mul(c, c));
  }, {a, b});
  check("pad_cols", [&] {
    Tensor c = pad_cols(a, 2, 1);
    return sum_all(mul(c, c));
  }, {a});
  check("col_interleave", [&] {
    Tensor c = col_interleave(a, 2, 2);
    return sum_all(mul(c, c));
  }, {a});
  check("resample_cols", [&] {
    Tensor c = resample_cols(a, 7);
    return sum_all(mul(c, c));
  }, {a});
  Tensor bias = randt({3}, 203);
  bias.set_requires_grad(true);
  check("add_bias", [&] { return sum_all(mul(add_bias(a, bias), add_bias(a, bias))); }, {a, bias});
  check("mean_cols", [&] {
    Tensor c = mean_cols(a);
    return sum_all(mul(c, c));
  }, {a});

  // matmul, all transpose flag combinations
  Tensor ma = randt({3, 4}, 211), mb = randt({4, 2}, 212);
  Tensor mat = randt({4, 3}, 213), mbt = randt({2, 4}, 214);
  ma.set_requires_grad(true);
  mb.set_requires_grad(true);
  mat.set_requires_grad(true);
  mbt.set_requires_grad(true);
  check("matmul nn", [&] {
    Tensor c = matmul(ma, mb);
    return sum_all(mul(c, c));
  }, {ma, mb});
  check("matmul tn", [&] {
    Tensor c = matmul(mat, mb, true, false);
    return sum_all(mul(c, c));
  }, {mat, mb});
  check("matmul nt", [&] {
    Tensor c = matmul(ma, mbt, false, true);
    return sum_all(mul(c, c));
  }, {ma, mbt});
  check("matmul tt", [&] {
    Tensor c = matmul(mat, mbt, true, true);
    return sum_all(mul(c, c));
  }, {mat, mbt});

  Tensor cx = randt({2, 11}, 221), cw = randt({3, 2, 4}, 222);
  cx.set_requires_grad(true);
  cw.set_requires_grad(true);
  check("conv1d", [&] {
    Tensor y = conv1d(cx, cw, 2);
    return sum_all(mul(y, y));
  }, {cx, cw});
  check("conv1d dilated", [&] {
    Tensor y = conv1d(cx, cw, 1, 2);
    return sum_all(mul(y, y));
  }, {cx, cw});
  Tensor ty = randt({3, 4}, 223), tw = randt({3, 2, 5}, 224);
  ty.set_requires_grad(true);
  tw.set_requires_grad(true);
  check("conv1d_transpose", [&] {
    Tensor y = conv1d_transpose(ty, tw, 3);
    return sum_all(mul(y, y));
  }, {ty, tw});
  Tensor dx = randt({3, 8}, 225), dw = randt({3, 5}, 226);
  dx.set_requires_grad(true);
  dw.set_requires_grad(true);
  check("depthwise_conv1d", [&] {
    Tensor y = depthwise_conv1d(dx, dw);
    return sum_all(mul(y, y));
  }, {dx, dw});

  check("softmax axis1", [&] {
    Tensor y = softmax(a, 1);
    return sum_all(mul(y, y));
  }, {a});
  check("softmax axis0", [&] {
    Tensor y = softmax(a, 0);
    return sum_all(mul(y, y));
  }, {a});

  Tensor lg = randt({3}, 231), lb = randt({3}, 232);
  lg.set_requires_grad(true);
  lb.set_requires_grad(true);
  check("layer_norm", [&] {
    Tensor y = layer_norm(a, lg, lb);
    return sum_all(mul(y, y));
  }, {a, lg, lb});

  Tensor q = randt({4, 3}, 241), k = randt({4, 5}, 242), v = randt({4, 5}, 243);
  q.set_requires_grad(true);
  k.set_requires_grad(true);
  v.set_requires_grad(true);
  check("multihead_attention", [&] {
    Tensor y = multihead_attention(q, k, v, 2, 1.0 / std::sqrt(2.0));
    return sum_all(mul(y, y));
  }, {q, k, v});

  Tensor hx = randt({2, 13}, 251);
  hx.set_requires_grad(true);
  check("chunk+overlap_add", [&] {
    ChunkInfo info;
    Tensor c = chunk(hx, 4, &info);
    Tensor c2 = mul(c, c);
    return sum_all(overlap_add(c2, info));
  }, {hx});

  Tensor px = randt({2, 10}, 261);
  px.set_requires_grad(true);
  check("maxpool_cols", [&] {
    Tensor y = maxpool_cols(px, 3, 2);
    return sum_all(mul(y, y));
  }, {px});

  check("repeat_cols", [&] {
    Tensor y = repeat_cols(a, 3);
    return sum_all(mul(y, y));
  }, {a});
}

TEST_CASE("multihead attention vs naive oracle") {
  int d = 4, lq = 3, lk = 5, heads = 2;
  Tensor q = randt({d, lq}, 301), k = randt({d, lk}, 302), v = randt({d, lk}, 303);
  double sc = 1.0 / std::sqrt(static_cast<double>(d) / heads);
  Tensor out = multihead_attention(q, k, v, heads, sc);
  auto want = attention_oracle(q.vec(), k.vec(), v.vec(), d, heads, lq, lk, sc);
  CHECK(max_abs_diff(out.vec(), want) < 1e-10);
}

TEST_CASE("attention_probs rows sum to one") {
  Tensor q = randt({4, 6}, 311), k = randt({4, 6}, 312);
  for (int h = 0; h < 2; ++h) {
    Tensor p = attention_probs(q, k, 2, 0.5, h);
    for (int i = 0; i < p.dim(0); ++i) {
      double s = 0.0;
      for (int j = 0; j < p.dim(1); ++j) s += p.at(i, j);
      CHECK(std::fabs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("attention heads not dividing dim is a configuration error") {
  Tensor q = randt({5, 3}, 321);
  CHECK_THROWS_AS(multihead_attention(q, q, q, 2, 1.0), ConfigError);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), Error);
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK(t.all_finite());
  t.data()[1] = std::nan("");
  CHECK(!t.all_finite());
}

TEST_CASE("determinism: same seed, same bits") {
  auto run = [] {
    Rng rng(4242);
    Tensor a = Tensor::randn({6, 6}, rng);
    Tensor b = Tensor::randn({6, 6}, rng);
    Tensor y = softmax(matmul(gelu(a), sigmoid(b)), 1);
    return y.vec();
  };
  auto r1 = run(), r2 = run();
  CHECK(r1 == r2);
}

TEST_CASE("no-grad scopes and tape isolation") {
  Tensor a = randt({2, 2}, 331);
  a.set_requires_grad(true);
  {
    Tape tape;
    Tensor y;
    {
      NoGradGuard ng;
      y = mul(a, a);
    }
    CHECK(tape.size() == 0);
    Tensor z = mul(a, a);
    CHECK(tape.size() == 1);
    tape.backward(sum_all(z));
  }
  CHECK(a.has_grad());
}

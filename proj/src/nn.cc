// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/nn.h"

#include <cmath>

#include "avfs/autograd.h"

namespace avfs {

Tensor glorot(Shape shape, Rng& rng) {
  double fan_in = 1.0, fan_out = 1.0;
  if (shape.size() == 1) {
    fan_in = fan_out = shape[0];
  } else if (shape.size() == 2) {
    fan_out = shape[0];
    fan_in = shape[1];
  } else if (shape.size() == 3) {
    fan_out = static_cast<double>(shape[0]) * shape[2];
    fan_in = static_cast<double>(shape[1]) * shape[2];
  }
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::rand_uniform(std::move(shape), rng, -limit, limit);
  t.set_requires_grad(true);
  return t;
}

Tensor repeat_cols(const Tensor& x, int times) {
  AVFS_CHECK(x.ndim() == 2 && times >= 1, "repeat_cols: bad args");
  int r = x.dim(0), c = x.dim(1);
  bool track = Tape::recording() && x.requires_grad();
  auto node = std::make_shared<TensorNode>();
  node->shape = {r, c * times};
  node->data.resize(static_cast<size_t>(r) * c * times);
  node->requires_grad = track;
  node->leaf = !track;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      double v = x.data()[static_cast<size_t>(i) * c + j];
      double* dst = node->data.data() + (static_cast<size_t>(i) * c + j) * times;
      for (int t = 0; t < times; ++t) dst[t] = v;
    }
  if (track) {
    auto xn = x.node();
    Tape::current()->record("repeat_cols", node, [xn, node, r, c, times](GradMap* sink) {
      std::vector<double> g(static_cast<size_t>(r) * c, 0.0);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const double* go = node->grad.data() + (static_cast<size_t>(i) * c + j) * times;
          double s = 0.0;
          for (int t = 0; t < times; ++t) s += go[t];
          g[static_cast<size_t>(i) * c + j] = s;
        }
      accumulate_grad(xn, g.data(), static_cast<int64_t>(g.size()), sink);
    });
  }
  return Tensor::from_node(node);
}

Tensor sinusoidal_encoding(int d, int length) {
  Tensor pe({d, length});
  for (int i = 0; i < d; ++i) {
    double freq = std::pow(10000.0, -2.0 * (i / 2) / d);
    for (int p = 0; p < length; ++p)
      pe.data()[static_cast<size_t>(i) * length + p] =
          (i % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
  }
  return pe;
}

Linear::Linear(int in, int out, Rng& rng, bool bias) {
  w = glorot({out, in}, rng);
  if (bias) {
    b = Tensor({out});
    b.set_requires_grad(true);
  }
}

Tensor Linear::apply(const Tensor& x) const {
  Tensor y = matmul(w, x);
  if (b.defined()) y = add_bias(y, b);
  return y;
}

void Linear::collect(const std::string& prefix, ParamList* out) const {
  out->push_back({prefix + ".w", w});
  if (b.defined()) out->push_back({prefix + ".b", b});
}

LayerNorm::LayerNorm(int dim) {
  gamma = Tensor({dim}, 1.0);
  gamma.set_requires_grad(true);
  beta = Tensor({dim});
  beta.set_requires_grad(true);
}

Tensor LayerNorm::apply(const Tensor& x) const {
  return layer_norm(x, gamma, beta, eps);
}

void LayerNorm::collect(const std::string& prefix, ParamList* out) const {
  out->push_back({prefix + ".gamma", gamma});
  out->push_back({prefix + ".beta", beta});
}

SelfAttention::SelfAttention(int dim, int heads, Rng& rng)
    : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng),
      wo(dim, dim, rng), heads(heads), dim(dim) {
  if (dim % heads != 0)
    throw ConfigError(str_cat("attention dim ", dim, " not divisible by ",
                              heads, " heads"));
}

Tensor SelfAttention::apply(const Tensor& x, int n_seg) const {
  return apply_qkv(x, x, n_seg);
}

Tensor SelfAttention::apply_qkv(const Tensor& q_in, const Tensor& kv_in,
                                int n_seg) const {
  Tensor q = wq.apply(q_in);
  Tensor k = wk.apply(kv_in);
  Tensor v = wv.apply(kv_in);
  double sc = 1.0 / std::sqrt(static_cast<double>(dim) / heads);
  Tensor att;
  if (n_seg == 1) {
    att = multihead_attention(q, k, v, heads, sc);
  } else {
    AVFS_CHECK(q.dim(1) % n_seg == 0 && k.dim(1) % n_seg == 0,
               "attention: lengths not divisible into ", n_seg, " segments");
    int lq = q.dim(1) / n_seg, lk = k.dim(1) / n_seg;
    std::vector<Tensor> outs;
    outs.reserve(static_cast<size_t>(n_seg));
    for (int s = 0; s < n_seg; ++s) {
      Tensor qs = cols(q, s * lq, (s + 1) * lq);
      Tensor ks = cols(k, s * lk, (s + 1) * lk);
      Tensor vs = cols(v, s * lk, (s + 1) * lk);
      outs.push_back(multihead_attention(qs, ks, vs, heads, sc));
    }
    att = concat_cols(outs);
  }
  return wo.apply(att);
}

void SelfAttention::collect(const std::string& prefix, ParamList* out) const {
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
  wo.collect(prefix + ".wo", out);
}

TransformerLayer::TransformerLayer(int dim, int heads, int ffn_mult, Rng& rng)
    : ln1(dim), ln2(dim), attn(dim, heads, rng),
      ff1(dim, dim * ffn_mult, rng), ff2(dim * ffn_mult, dim, rng) {}

Tensor TransformerLayer::apply(const Tensor& x, int n_seg) const {
  Tensor h = add(x, attn.apply(ln1.apply(x), n_seg));
  Tensor f = ff2.apply(gelu(ff1.apply(ln2.apply(h))));
  return add(h, f);
}

void TransformerLayer::collect(const std::string& prefix, ParamList* out) const {
  ln1.collect(prefix + ".ln1", out);
  ln2.collect(prefix + ".ln2", out);
  attn.collect(prefix + ".attn", out);
  ff1.collect(prefix + ".ff1", out);
  ff2.collect(prefix + ".ff2", out);
}

}  // namespace avfs

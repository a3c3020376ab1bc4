// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/branchformer.h"

#include "avfs/ops.h"

namespace avfs {

MhsaBranch::MhsaBranch(int dim, int heads, Rng& rng)
    : ln(dim), attn(dim, heads, rng) {}

Tensor MhsaBranch::apply(const Tensor& x) const {
  return attn.apply(ln.apply(x), 1);
}

void MhsaBranch::collect(const std::string& prefix, ParamList* out) const {
  ln.collect(prefix + ".ln", out);
  attn.collect(prefix + ".attn", out);
}

CgMlpBranch::CgMlpBranch(int dim, int hidden, int csgu_kernel, Rng& rng)
    : ln_pre(dim), up(dim, hidden, rng), ln_gate(hidden / 2),
      down(hidden / 2, dim, rng) {
  if (hidden % 2 != 0)
    throw ConfigError(str_cat("cgMLP hidden dim must be even, got ", hidden));
  if (csgu_kernel % 2 == 0)
    throw ConfigError(str_cat("CSGU kernel must be odd, got ", csgu_kernel));
  dw_kernel = glorot({hidden / 2, csgu_kernel}, rng);
  dw_bias = Tensor({hidden / 2});
  dw_bias.set_requires_grad(true);
}

Tensor CgMlpBranch::csgu(const Tensor& h_z) const {
  int dh = h_z.dim(0);
  if (dh % 2 != 0)
    throw ConfigError(str_cat("CSGU input must have even rows, got ", dh));
  Tensor h1 = rows(h_z, 0, dh / 2);
  Tensor h2 = rows(h_z, dh / 2, dh);
  Tensor gate = add_bias(depthwise_conv1d(ln_gate.apply(h2), dw_kernel), dw_bias);
  return mul(h1, gate);
}

Tensor CgMlpBranch::apply(const Tensor& x) const {
  Tensor h = gelu(up.apply(ln_pre.apply(x)));
  return down.apply(csgu(h));
}

void CgMlpBranch::collect(const std::string& prefix, ParamList* out) const {
  ln_pre.collect(prefix + ".ln_pre", out);
  up.collect(prefix + ".up", out);
  ln_gate.collect(prefix + ".ln_gate", out);
  out->push_back({prefix + ".dw_kernel", dw_kernel});
  out->push_back({prefix + ".dw_bias", dw_bias});
  down.collect(prefix + ".down", out);
}

BranchformerBlock::BranchformerBlock(const BranchformerConfig& cfg, Rng& rng)
    : mhsa(cfg.dim, cfg.heads, rng),
      cgmlp(cfg.dim, cfg.hidden, cfg.csgu_kernel, rng),
      alpha_debug(cfg.alpha_debug) {
  if (cfg.dim % cfg.heads != 0)
    throw ConfigError(str_cat("encoder dim ", cfg.dim, " not divisible by ",
                              cfg.heads, " heads"));
  alpha_logit = Tensor::scalar(0.0, true);
}

double BranchformerBlock::alpha_value() const {
  if (alpha_debug == 0) return 0.0;
  if (alpha_debug == 1) return 1.0;
  return 1.0 / (1.0 + std::exp(-alpha_logit.item()));
}

Tensor BranchformerBlock::apply(const Tensor& x) const {
  if (alpha_debug == 0) return add(x, cgmlp.apply(x));
  if (alpha_debug == 1) return add(x, mhsa.apply(x));
  Tensor a = sigmoid(alpha_logit);
  Tensor one_minus_a = sub(Tensor::scalar(1.0), a);
  Tensor merged = add(mul_scalar(mhsa.apply(x), a),
                      mul_scalar(cgmlp.apply(x), one_minus_a));
  return add(x, merged);
}

void BranchformerBlock::collect(const std::string& prefix, ParamList* out) const {
  mhsa.collect(prefix + ".mhsa", out);
  cgmlp.collect(prefix + ".cgmlp", out);
  out->push_back({prefix + ".alpha_logit", alpha_logit});
}

BranchformerEncoder::BranchformerEncoder(const BranchformerConfig& cfg, Rng& rng) {
  for (int i = 0; i < cfg.n_blocks; ++i) blocks.emplace_back(cfg, rng);
}

Tensor BranchformerEncoder::encode(const Tensor& h_x) const {
  Tensor h = h_x;
  for (const auto& b : blocks) h = b.apply(h);
  return h;
}

void BranchformerEncoder::collect(const std::string& prefix, ParamList* out) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

}  // namespace avfs

// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/visual_frontend.h"

#include "avfs/ops.h"

namespace avfs {

VisualFrontend::VisualFrontend(const VisualFrontendConfig& cfg, Rng& rng)
    : embed_pw(cfg.feat_dim, cfg.embed_dim, rng),
      proj(cfg.embed_dim, cfg.out_dim, rng), kernel(cfg.tcn_kernel) {
  AVFS_CHECK(cfg.tcn_kernel % 2 == 1, "TCN kernel must be odd for same padding");
  embed_tw = glorot({cfg.embed_dim, cfg.embed_dim, cfg.tcn_kernel}, rng);
  embed_tb = Tensor({cfg.embed_dim});
  embed_tb.set_requires_grad(true);
  for (int b = 0; b < cfg.tcn_blocks; ++b) {
    TcnBlock blk;
    blk.dilation = 1 << b;
    blk.dconv_w = glorot({cfg.out_dim, cfg.out_dim, cfg.tcn_kernel}, rng);
    blk.dconv_b = Tensor({cfg.out_dim});
    blk.dconv_b.set_requires_grad(true);
    blk.pw = Linear(cfg.out_dim, cfg.out_dim, rng);
    tcn_blocks.push_back(std::move(blk));
  }
}

Tensor VisualFrontend::extract_embedding(const Tensor& frames) const {
  AVFS_CHECK(frames.defined() && frames.ndim() == 2 && frames.dim(1) >= 1,
             "visual stream is empty");
  Tensor x = gelu(embed_pw.apply(frames));
  int half = (kernel - 1) / 2;
  x = add_bias(conv1d(pad_cols(x, half, half), embed_tw, 1), embed_tb);
  return gelu(x);
}

Tensor VisualFrontend::tcn(const Tensor& emb) const {
  Tensor x = proj.apply(emb);
  for (const auto& blk : tcn_blocks) {
    int half = blk.dilation * (kernel - 1) / 2;
    Tensor h = add_bias(
        conv1d(pad_cols(x, half, half), blk.dconv_w, 1, blk.dilation),
        blk.dconv_b);
    x = add(x, blk.pw.apply(gelu(h)));
  }
  return x;
}

Tensor VisualFrontend::apply(const Tensor& frames) const {
  return tcn(extract_embedding(frames));
}

int VisualFrontend::receptive_field() const {
  int rf = 1;
  for (const auto& blk : tcn_blocks) rf += (kernel - 1) * blk.dilation;
  return rf;
}

void VisualFrontend::collect(const std::string& prefix, ParamList* out) const {
  embed_pw.collect(prefix + ".embed_pw", out);
  out->push_back({prefix + ".embed_tw", embed_tw});
  out->push_back({prefix + ".embed_tb", embed_tb});
  proj.collect(prefix + ".proj", out);
  for (size_t i = 0; i < tcn_blocks.size(); ++i) {
    std::string p = prefix + ".tcn" + std::to_string(i);
    out->push_back({p + ".dconv_w", tcn_blocks[i].dconv_w});
    out->push_back({p + ".dconv_b", tcn_blocks[i].dconv_b});
    tcn_blocks[i].pw.collect(p + ".pw", out);
  }
}

Tensor align_to_chunks(const Tensor& feat, int I_target) {
  AVFS_CHECK(I_target >= 1, "align_to_chunks: target length must be >= 1");
  return resample_cols(feat, I_target);
}

}  // namespace avfs

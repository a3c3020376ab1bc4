// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/counting.h"

#include "avfs/ops.h"

namespace avfs {

CountingHead::CountingHead(const CountingConfig& cfg, Rng& rng)
    : cfg(cfg), attn(cfg.feat_dim, cfg.heads, rng),
      mlp1(cfg.feat_dim, cfg.hidden, rng), mlp2(cfg.hidden, 1, rng) {
  AVFS_CHECK(cfg.kernel % 2 == 1, "counting conv kernel must be odd");
  conv_w = glorot({cfg.feat_dim, cfg.in_dim, cfg.kernel}, rng);
  conv_b = Tensor({cfg.feat_dim});
  conv_b.set_requires_grad(true);
}

Tensor CountingHead::mask_to_frames(const Tensor& mask) const {
  AVFS_CHECK(mask.ndim() == 2 && mask.dim(0) == cfg.in_dim,
             "mask_to_frames: expected [", cfg.in_dim, ",L], got ",
             shape_str(mask.shape()));
  if (mask.dim(1) < cfg.pool)
    throw ShapeError(str_cat("mask_to_frames: input too short: L=",
                             mask.dim(1), " < pool window ", cfg.pool));
  int half = (cfg.kernel - 1) / 2;
  Tensor x = add_bias(conv1d(pad_cols(mask, half, half), conv_w, 1), conv_b);
  x = gelu(x);
  return maxpool_cols(x, cfg.pool, cfg.pool);
}

Tensor CountingHead::attend_pool(const Tensor& f_seq) const {
  return mean_cols(attn.apply(f_seq, 1));
}

Tensor CountingHead::presence_probability(const Tensor& f) const {
  Tensor h = gelu(mlp1.apply(f));
  Tensor logit = mlp2.apply(h);  // [1, 1]
  return sigmoid(logit);
}

Tensor CountingHead::probability(const Tensor& mask) const {
  return presence_probability(attend_pool(mask_to_frames(mask)));
}

void CountingHead::collect(const std::string& prefix, ParamList* out) const {
  out->push_back({prefix + ".conv_w", conv_w});
  out->push_back({prefix + ".conv_b", conv_b});
  attn.collect(prefix + ".attn", out);
  mlp1.collect(prefix + ".mlp1", out);
  mlp2.collect(prefix + ".mlp2", out);
}

PresenceEstimate count_and_select(const std::vector<double>& probs, double tau) {
  AVFS_CHECK(tau > 0.0 && tau <= 1.0, "threshold must lie in (0,1], got ", tau);
  PresenceEstimate est;
  est.probabilities = probs;
  est.tau = tau;
  for (size_t i = 0; i < probs.size(); ++i)
    if (probs[i] >= tau) est.selected_indices.push_back(static_cast<int>(i));
  est.estimated_count = static_cast<int>(est.selected_indices.size());
  return est;
}

}  // namespace avfs

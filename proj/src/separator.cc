// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/separator.h"

#include <cmath>

namespace avfs {

namespace {

// Positional encoding tiled across segments: for chunk-major data the
// within-chunk position c repeats every C columns; for position-major data
// the chunk index repeats every I columns.
Tensor tiled_encoding(int d, int seg_len, int n_seg) {
  Tensor base = sinusoidal_encoding(d, seg_len);
  Tensor out({d, seg_len * n_seg});
  for (int i = 0; i < d; ++i)
    for (int s = 0; s < n_seg; ++s)
      std::copy(base.data() + static_cast<size_t>(i) * seg_len,
                base.data() + static_cast<size_t>(i + 1) * seg_len,
                out.data() + (static_cast<size_t>(i) * n_seg + s) * seg_len);
  return out;
}

}  // namespace

CrossModalFuse::CrossModalFuse(int dim, Rng& rng)
    : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), dim(dim) {}

Tensor CrossModalFuse::apply(const Tensor& h_v, const Tensor& h_a2, int C) const {
  AVFS_CHECK(h_v.ndim() == 2 && h_a2.ndim() == 2, "cross_modal: 2-D inputs");
  int n_chunks = h_a2.dim(1) / C;
  if (h_v.dim(1) != n_chunks)
    throw DataMismatchError(
        str_cat("cross_modal: visual length ", h_v.dim(1),
                " does not match chunk count ", n_chunks,
                "; align_to_chunks first"));
  Tensor q = wq.apply(h_v);    // [D, I]
  Tensor k = wk.apply(h_a2);   // [D, I*C]
  Tensor v = wv.apply(h_a2);
  double sc = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(n_chunks));
  for (int i = 0; i < n_chunks; ++i) {
    Tensor qi = cols(q, i, i + 1);                    // [D, 1]
    Tensor ki = cols(k, i * C, (i + 1) * C);          // [D, C]
    Tensor vi = cols(v, i * C, (i + 1) * C);
    outs.push_back(multihead_attention(qi, ki, vi, 1, sc));  // [D, 1]
  }
  Tensor fused = concat_cols(outs);                   // [D, I]
  return add(h_a2, repeat_cols(fused, C));
}

void CrossModalFuse::collect(const std::string& prefix, ParamList* out) const {
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
}

Separator::Separator(const SeparatorConfig& cfg, Rng& rng)
    : cfg(cfg), fuse(cfg.dim, rng), mask_out(cfg.dim, cfg.dim, rng) {
  for (int i = 0; i < cfg.n_intra; ++i)
    intra_layers.emplace_back(cfg.dim, cfg.heads, cfg.ffn_mult, rng);
  for (int i = 0; i < cfg.n_inter; ++i)
    inter_layers.emplace_back(cfg.dim, cfg.heads, cfg.ffn_mult, rng);
}

ChunkedFeature Separator::chunk_features(const Tensor& h_a) const {
  ChunkedFeature cf;
  cf.data = chunk(h_a, cfg.chunk, &cf.info);
  return cf;
}

int Separator::chunk_count(int L, int C) {
  int hop = C / 2;
  int eff = hop + L;  // front pad of C/2
  int pad_back = eff < C ? C - eff : (hop - (eff - C) % hop) % hop;
  return (eff + pad_back - C) / hop + 1;
}

Tensor Separator::intra(const Tensor& x, int n_chunks) const {
  Tensor h = add(x, tiled_encoding(x.dim(0), cfg.chunk, n_chunks));
  for (const auto& layer : intra_layers) h = layer.apply(h, n_chunks);
  return h;
}

Tensor Separator::inter(const Tensor& x, int n_chunks) const {
  // x arrives chunk-major; regroup so each within-chunk position's I values
  // are contiguous, attend across chunks, regroup back.
  Tensor h = col_interleave(x, n_chunks, cfg.chunk);  // -> position-major
  h = add(h, tiled_encoding(h.dim(0), n_chunks, cfg.chunk));
  for (const auto& layer : inter_layers) h = layer.apply(h, cfg.chunk);
  return col_interleave(h, cfg.chunk, n_chunks);  // -> chunk-major
}

Tensor Separator::branch_chunk_masks(const Tensor& x_after_intra,
                                     const Tensor& h_v, int n_chunks) const {
  Tensor x = fuse.apply(h_v, x_after_intra, cfg.chunk);
  x = inter(x, n_chunks);
  for (int r = 1; r < cfg.repeats; ++r) {
    x = intra(x, n_chunks);
    x = fuse.apply(h_v, x, cfg.chunk);
    x = inter(x, n_chunks);
  }
  return relu(mask_out.apply(x));
}

std::vector<Tensor> Separator::separate_all(const Tensor& h_a,
                                            const std::vector<Tensor>& visuals,
                                            ChunkInfo* info_out) const {
  if (visuals.empty())
    throw ContractError("separate_all: need at least one branch");
  ChunkedFeature cf = chunk_features(h_a);
  if (info_out) *info_out = cf.info;
  // The first intra pass sees identical input on every branch and the
  // parameters are shared, so it is computed once.
  Tensor shared = intra(cf.data, cf.info.n_chunks);
  std::vector<Tensor> masks;
  masks.reserve(visuals.size());
  for (const auto& h_v : visuals) {
    Tensor chunk_masks = branch_chunk_masks(shared, h_v, cf.info.n_chunks);
    masks.push_back(overlap_add(chunk_masks, cf.info));
  }
  return masks;
}

void Separator::collect(const std::string& prefix, ParamList* out) const {
  for (size_t i = 0; i < intra_layers.size(); ++i)
    intra_layers[i].collect(prefix + ".intra" + std::to_string(i), out);
  for (size_t i = 0; i < inter_layers.size(); ++i)
    inter_layers[i].collect(prefix + ".inter" + std::to_string(i), out);
  fuse.collect(prefix + ".fuse", out);
  mask_out.collect(prefix + ".mask_out", out);
}

}  // namespace avfs

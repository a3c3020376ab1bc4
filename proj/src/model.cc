// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/model.h"

#include "avfs/autograd.h"
#include "avfs/ops.h"

namespace avfs {

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.sample_rate = 16000;
  c.dim = 256;
  c.enc_heads = 8;
  c.enc_hidden = 2048;
  c.csgu_kernel = 31;
  c.chunk = 160;
  c.n_intra = 8;
  c.n_inter = 7;
  c.sep_heads = 8;
  c.count_dim = 128;
  c.count_hidden = 128;
  return c;
}

namespace {

BranchformerConfig enc_config(const ModelConfig& m) {
  BranchformerConfig c;
  c.dim = m.dim;
  c.heads = m.enc_heads;
  c.hidden = m.enc_hidden;
  c.csgu_kernel = m.csgu_kernel;
  c.n_blocks = m.enc_blocks;
  c.alpha_debug = m.alpha_debug;
  return c;
}

VisualFrontendConfig vis_config(const ModelConfig& m) {
  VisualFrontendConfig c;
  c.feat_dim = m.visual_dim;
  c.embed_dim = m.visual_embed;
  c.out_dim = m.dim;
  c.tcn_blocks = m.tcn_blocks;
  c.tcn_kernel = m.tcn_kernel;
  return c;
}

SeparatorConfig sep_config(const ModelConfig& m) {
  SeparatorConfig c;
  c.dim = m.dim;
  c.chunk = m.chunk;
  c.n_intra = m.n_intra;
  c.n_inter = m.n_inter;
  c.heads = m.sep_heads;
  c.ffn_mult = m.ffn_mult;
  c.repeats = m.sep_repeats;
  return c;
}

CountingConfig count_config(const ModelConfig& m) {
  CountingConfig c;
  c.in_dim = m.dim;
  c.feat_dim = m.count_dim;
  c.heads = m.count_heads;
  c.hidden = m.count_hidden;
  return c;
}

}  // namespace

AvfsNet::AvfsNet(const ModelConfig& config) : cfg(config) {
  Rng rng(derive_seed(cfg.init_seed, 0x0de1));
  frontend = AudioFrontEnd(cfg.dim, cfg.kernel, rng);
  encoder = BranchformerEncoder(enc_config(cfg), rng);
  visual = VisualFrontend(vis_config(cfg), rng);
  separator = Separator(sep_config(cfg), rng);
  decoder = AudioDecoder(cfg.dim, cfg.kernel, rng);
  counting = CountingHead(count_config(cfg), rng);
}

EncodedAudio AvfsNet::encode_mixture(const Tensor& wav) const {
  EncodedAudio h = frontend.encode(wav);
  h.features = encoder.encode(h.features);
  return h;
}

Tensor AvfsNet::visual_features(const Tensor& frames, int I_target) const {
  return align_to_chunks(visual.apply(frames), I_target);
}

int AvfsNet::chunk_count_for(int L) const {
  return Separator::chunk_count(L, cfg.chunk);
}

std::vector<Tensor> AvfsNet::masks(const EncodedAudio& h,
                                   const std::vector<Tensor>& visuals) const {
  return separator.separate_all(h.features, visuals);
}

Tensor AvfsNet::branch_mask(const EncodedAudio& h, const Tensor& visual_feat) const {
  return separator.separate_all(h.features, {visual_feat}).front();
}

Tensor AvfsNet::reconstruct(const Tensor& mask, const EncodedAudio& h, int len) const {
  return decoder.decode(mask, h, len);
}

Tensor AvfsNet::presence(const Tensor& mask) const {
  return counting.probability(mask);
}

void AvfsNet::collect(ParamList* out) const {
  collect_backbone(out);
  collect_counting(out);
}

void AvfsNet::collect_backbone(ParamList* out) const {
  frontend.collect("frontend", out);
  encoder.collect("encoder", out);
  visual.collect("visual", out);
  separator.collect("separator", out);
  decoder.collect("decoder", out);
}

void AvfsNet::collect_counting(ParamList* out) const {
  counting.collect("counting", out);
}

SeparationOutput run_separation(const AvfsNet& model, const Waveform& mixture,
                                const std::vector<VisualStream>& visuals,
                                double tau) {
  AVFS_CHECK(!visuals.empty(), "run_separation: need at least one visual cue");
  NoGradGuard ng;
  Tensor wav = waveform_to_tensor(mixture);
  EncodedAudio h = model.encode_mixture(wav);
  int I = model.chunk_count_for(h.features.dim(1));
  std::vector<Tensor> feats;
  feats.reserve(visuals.size());
  for (const auto& v : visuals)
    feats.push_back(model.visual_features(v.frames, I));
  SeparationOutput out;
  out.masks = model.masks(h, feats);
  std::vector<double> probs;
  for (const auto& m : out.masks) {
    out.estimates.push_back(
        model.reconstruct(m, h, static_cast<int>(mixture.samples.size())));
    probs.push_back(model.presence(m).item());
  }
  out.presence = count_and_select(probs, tau);
  return out;
}

uint64_t param_hash(const ParamList& params) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    h = fnv1a(p.name.data(), p.name.size(), h);
    h = fnv1a(p.tensor.data(), static_cast<size_t>(p.tensor.numel()) * sizeof(double), h);
  }
  return h;
}

}  // namespace avfs

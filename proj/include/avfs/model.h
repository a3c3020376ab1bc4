// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_MODEL_H_
#define AVFS_MODEL_H_

#include <string>
#include <vector>

#include "avfs/audio_codec.h"
#include "avfs/branchformer.h"
#include "avfs/counting.h"
#include "avfs/separator.h"
#include "avfs/visual_frontend.h"

namespace avfs {

struct ModelConfig {
  int sample_rate = 8000;
  int kernel = 16;       // front-end K, stride K/2
  int dim = 64;          // D
  int enc_heads = 4;     // Branchformer N_H
  int enc_hidden = 128;  // cgMLP D_hidden
  int csgu_kernel = 7;
  int enc_blocks = 1;
  int chunk = 80;        // C = 2*sample_rate/(stride*visual_rate)
  int n_intra = 2;
  int n_inter = 2;
  int sep_heads = 4;
  int ffn_mult = 4;
  int sep_repeats = 1;
  int visual_dim = 8;    // F_v
  int visual_embed = 32; // E
  int tcn_blocks = 3;
  int tcn_kernel = 3;
  int visual_rate = 25;
  int count_dim = 64;    // D_c
  int count_hidden = 64;
  int count_heads = 4;
  double tau = 0.5;
  int alpha_debug = -1;
  uint64_t init_seed = 1;

  // Full-size configuration (16 kHz audio); training it is out of desk scope.
  static ModelConfig paper_scale();
};

class AvfsNet {
 public:
  AvfsNet() = default;
  explicit AvfsNet(const ModelConfig& cfg);

  // Front-end + Branchformer.
  EncodedAudio encode_mixture(const Tensor& wav) const;  // [1,T] -> [D,L]
  // Visual stream -> [D, I_target] aligned features.
  Tensor visual_features(const Tensor& frames, int I_target) const;
  // Chunk count for an encoded length.
  int chunk_count_for(int L) const;
  // Full-length masks for each branch (visuals already aligned).
  std::vector<Tensor> masks(const EncodedAudio& h,
                            const std::vector<Tensor>& visuals) const;
  // Single-branch mask (stage-1 / stage-2 path).
  Tensor branch_mask(const EncodedAudio& h, const Tensor& visual) const;
  Tensor reconstruct(const Tensor& mask, const EncodedAudio& h, int len) const;
  Tensor presence(const Tensor& mask) const;

  void collect(ParamList* out) const;
  void collect_backbone(ParamList* out) const;
  void collect_counting(ParamList* out) const;

  ModelConfig cfg;
  AudioFrontEnd frontend;
  BranchformerEncoder encoder;
  VisualFrontend visual;
  Separator separator;
  AudioDecoder decoder;
  CountingHead counting;
};

// End-to-end separation of one mixture with M visual cues.
struct SeparationOutput {
  std::vector<Tensor> masks;       // [D, L] per branch
  std::vector<Tensor> estimates;   // [1, T] per branch
  PresenceEstimate presence;
};

SeparationOutput run_separation(const AvfsNet& model, const Waveform& mixture,
                                const std::vector<VisualStream>& visuals,
                                double tau);

uint64_t param_hash(const ParamList& params);

}  // namespace avfs

#endif  // AVFS_MODEL_H_

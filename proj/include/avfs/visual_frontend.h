// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_VISUAL_FRONTEND_H_
#define AVFS_VISUAL_FRONTEND_H_

#include <string>
#include <vector>

#include "avfs/nn.h"

namespace avfs {

// Per-frame visual feature stream (F_v values per video frame).
struct VisualStream {
  Tensor frames;        // [F_v, I_raw]
  int frame_rate = 25;  // Hz
};

struct VisualFrontendConfig {
  int feat_dim = 8;     // F_v
  int embed_dim = 32;   // E
  int out_dim = 64;     // D
  int tcn_blocks = 3;   // dilations 1, 2, 4, ...
  int tcn_kernel = 3;
};

// Trainable frontend over visual feature streams: a pointwise + temporal
// conv embedding stack followed by a residual dilated TCN projecting to the
// audio feature dimension.
class VisualFrontend {
 public:
  VisualFrontend() = default;
  VisualFrontend(const VisualFrontendConfig& cfg, Rng& rng);

  // [F_v, I_raw] -> [E, I_raw]; temporal length preserved.
  Tensor extract_embedding(const Tensor& frames) const;
  // [E, I_raw] -> [D, I_raw]
  Tensor tcn(const Tensor& emb) const;
  Tensor apply(const Tensor& frames) const;

  int receptive_field() const;  // 1 + sum (K-1)*dilation

  void collect(const std::string& prefix, ParamList* out) const;

  struct TcnBlock {
    Tensor dconv_w;  // [D, D, K], dilated, same padding
    Tensor dconv_b;  // [D]
    Linear pw;       // D -> D, applied after GeLU
    int dilation = 1;
  };

  Linear embed_pw;   // F_v -> E pointwise
  Tensor embed_tw;   // [E, E, K] temporal, same padding
  Tensor embed_tb;   // [E]
  Linear proj;       // E -> D entry projection
  std::vector<TcnBlock> tcn_blocks;
  int kernel = 3;
};

// Resample visual features along time to the separator's chunk count.
// Identity when the lengths already agree.
Tensor align_to_chunks(const Tensor& feat, int I_target);

}  // namespace avfs

#endif  // AVFS_VISUAL_FRONTEND_H_

// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_COUNTING_H_
#define AVFS_COUNTING_H_

#include <string>
#include <vector>

#include "avfs/nn.h"

namespace avfs {

struct CountingConfig {
  int in_dim = 64;    // D of the masks
  int feat_dim = 64;  // D_c
  int kernel = 3;
  int pool = 4;
  int heads = 4;
  int hidden = 64;    // MLP hidden width
};

// Binary valid-vs-phantom mask classifier: conv + max-pool framing, one
// self-attention layer, mean pooling, two-layer MLP to a probability.
class CountingHead {
 public:
  CountingHead() = default;
  CountingHead(const CountingConfig& cfg, Rng& rng);

  // [D, L] -> [D_c, floor(L/pool)]; throws when L < pool.
  Tensor mask_to_frames(const Tensor& mask) const;
  // [D_c, L'] -> [D_c, 1]
  Tensor attend_pool(const Tensor& f_seq) const;
  // [D_c, 1] -> scalar probability in (0, 1)
  Tensor presence_probability(const Tensor& f) const;
  // Full head on one mask.
  Tensor probability(const Tensor& mask) const;

  void collect(const std::string& prefix, ParamList* out) const;

  CountingConfig cfg;
  Tensor conv_w;  // [D_c, D, kernel]
  Tensor conv_b;  // [D_c]
  SelfAttention attn;
  Linear mlp1, mlp2;
};

// Thresholded branch selection over per-branch probabilities.
struct PresenceEstimate {
  std::vector<double> probabilities;
  double tau = 0.5;
  std::vector<int> selected_indices;  // { i : p_i >= tau }, ascending
  int estimated_count = 0;
};

PresenceEstimate count_and_select(const std::vector<double>& probs, double tau);

}  // namespace avfs

#endif  // AVFS_COUNTING_H_

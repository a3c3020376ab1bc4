// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_BRANCHFORMER_H_
#define AVFS_BRANCHFORMER_H_

#include <string>
#include <vector>

#include "avfs/nn.h"

namespace avfs {

struct BranchformerConfig {
  int dim = 64;          // D, divisible by heads
  int heads = 4;         // N_H
  int hidden = 128;      // D_hidden, even
  int csgu_kernel = 7;   // depthwise kernel, odd
  int n_blocks = 1;
  // Debug-only merge override: -1 trains the sigmoid weight; 0 or 1 pins the
  // merge to one branch exactly. Not reachable from training configs.
  int alpha_debug = -1;
};

// Global branch: LayerNorm -> Q/K/V projections -> multi-head attention ->
// head concat -> output projection. Shape preserving.
class MhsaBranch {
 public:
  MhsaBranch() = default;
  MhsaBranch(int dim, int heads, Rng& rng);
  Tensor apply(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList* out) const;

  LayerNorm ln;
  SelfAttention attn;
};

// Local branch: LayerNorm -> up projection -> GeLU -> CSGU -> down projection.
class CgMlpBranch {
 public:
  CgMlpBranch() = default;
  CgMlpBranch(int dim, int hidden, int csgu_kernel, Rng& rng);
  // Convolutional spatial gating unit: splits rows in half, gates the first
  // half with a depthwise-convolved, layer-normalized copy of the second.
  Tensor csgu(const Tensor& h_z) const;
  Tensor apply(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList* out) const;

  LayerNorm ln_pre;
  Linear up;          // D -> D_hidden
  LayerNorm ln_gate;  // over D_hidden/2
  Tensor dw_kernel;   // [D_hidden/2, Kd]
  Tensor dw_bias;     // [D_hidden/2]
  Linear down;        // D_hidden/2 -> D
};

// One two-branch block: out = x + alpha*mhsa(x) + (1-alpha)*cgmlp(x) with
// alpha = sigmoid(alpha_logit).
class BranchformerBlock {
 public:
  BranchformerBlock() = default;
  BranchformerBlock(const BranchformerConfig& cfg, Rng& rng);
  Tensor apply(const Tensor& x) const;
  double alpha_value() const;  // current merge weight
  void collect(const std::string& prefix, ParamList* out) const;

  MhsaBranch mhsa;
  CgMlpBranch cgmlp;
  Tensor alpha_logit;  // [1]
  int alpha_debug = -1;
};

class BranchformerEncoder {
 public:
  BranchformerEncoder() = default;
  BranchformerEncoder(const BranchformerConfig& cfg, Rng& rng);
  Tensor encode(const Tensor& h_x) const;
  void collect(const std::string& prefix, ParamList* out) const;

  std::vector<BranchformerBlock> blocks;
};

}  // namespace avfs

#endif  // AVFS_BRANCHFORMER_H_

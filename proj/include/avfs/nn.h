// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_NN_H_
#define AVFS_NN_H_

#include <string>
#include <vector>

#include "avfs/ops.h"
#include "avfs/tensor.h"

namespace avfs {

struct ParamEntry {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<ParamEntry>;

// Glorot-uniform init; fan pair inferred from the shape.
Tensor glorot(Shape shape, Rng& rng);

// Repeat each column block: x[D, I] -> [D, I*times], output column i*times + c
// is x[:, i].
Tensor repeat_cols(const Tensor& x, int times);

// Sinusoidal absolute positional encoding, feature-major [d, length].
Tensor sinusoidal_encoding(int d, int length);

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Rng& rng, bool bias = true);
  Tensor apply(const Tensor& x) const;  // [in, L] -> [out, L]
  void collect(const std::string& prefix, ParamList* out) const;

  Tensor w, b;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int dim);
  Tensor apply(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList* out) const;

  Tensor gamma, beta;
  double eps = 1e-5;
};

// Q/K/V/output projected multi-head attention. Queries and keys/values are
// split into n_seg contiguous column blocks; attention runs independently
// per block (block b of the queries attends to block b of the keys).
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(int dim, int heads, Rng& rng);
  Tensor apply(const Tensor& x, int n_seg = 1) const;
  Tensor apply_qkv(const Tensor& q_in, const Tensor& kv_in, int n_seg) const;
  void collect(const std::string& prefix, ParamList* out) const;

  Linear wq, wk, wv, wo;
  int heads = 1;
  int dim = 0;
};

// Pre-norm transformer layer: x + Attn(LN(x)), then x + FFN(LN(x)).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(int dim, int heads, int ffn_mult, Rng& rng);
  Tensor apply(const Tensor& x, int n_seg = 1) const;
  void collect(const std::string& prefix, ParamList* out) const;

  LayerNorm ln1, ln2;
  SelfAttention attn;
  Linear ff1, ff2;
};

}  // namespace avfs

#endif  // AVFS_NN_H_

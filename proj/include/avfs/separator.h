// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_SEPARATOR_H_
#define AVFS_SEPARATOR_H_

#include <string>
#include <vector>

#include "avfs/nn.h"
#include "avfs/ops.h"

namespace avfs {

// Chunked feature map. `data` is [D, I*C] chunk-major: column i*C + c holds
// the value at within-chunk position c of chunk i.
struct ChunkedFeature {
  Tensor data;
  ChunkInfo info;
};

struct SeparatorConfig {
  int dim = 64;       // D
  int chunk = 80;     // C, even
  int n_intra = 2;
  int n_inter = 2;
  int heads = 4;
  int ffn_mult = 4;
  int repeats = 1;    // intra -> cross -> inter sweeps
};

// Cross-attention fusion: visual time step i queries the C audio positions
// of chunk i (single head, scale 1/sqrt(D)); the attention output is
// broadcast over the chunk and added residually to the audio features.
class CrossModalFuse {
 public:
  CrossModalFuse() = default;
  CrossModalFuse(int dim, Rng& rng);
  // h_v [D, I], h_a2 [D, I*C] chunk-major -> [D, I*C]
  Tensor apply(const Tensor& h_v, const Tensor& h_a2, int C) const;
  void collect(const std::string& prefix, ParamList* out) const;

  Linear wq, wk, wv;
  int dim = 0;
};

// Parallel weight-shared separation: chunk once, run
// IntraTransformer -> CrossModalTransformer -> InterTransformer per branch,
// overlap-add chunk masks back to full length.
class Separator {
 public:
  Separator() = default;
  Separator(const SeparatorConfig& cfg, Rng& rng);

  ChunkedFeature chunk_features(const Tensor& h_a) const;
  // Number of chunks the grid produces for a length-L feature map.
  static int chunk_count(int L, int C);

  // Transformer stacks; both take and return chunk-major [D, I*C].
  Tensor intra(const Tensor& x, int n_chunks) const;
  Tensor inter(const Tensor& x, int n_chunks) const;
  // Chunk masks (non-negative) for one branch given aligned visual features.
  Tensor branch_chunk_masks(const Tensor& x_after_intra, const Tensor& h_v,
                            int n_chunks) const;

  // Full-length masks for all branches, in input order. Visual features must
  // already be aligned to the chunk count.
  std::vector<Tensor> separate_all(const Tensor& h_a,
                                   const std::vector<Tensor>& visuals,
                                   ChunkInfo* info_out = nullptr) const;

  void collect(const std::string& prefix, ParamList* out) const;

  SeparatorConfig cfg;
  std::vector<TransformerLayer> intra_layers;
  std::vector<TransformerLayer> inter_layers;
  CrossModalFuse fuse;
  Linear mask_out;
};

}  // namespace avfs

#endif  // AVFS_SEPARATOR_H_

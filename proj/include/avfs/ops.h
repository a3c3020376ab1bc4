// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_OPS_H_
#define AVFS_OPS_H_

#include <vector>

#include "avfs/autograd.h"
#include "avfs/tensor.h"

namespace avfs {

// ---- element-wise (same shape) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// ---- constants ----
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor neg(const Tensor& x);

// scalar-tensor broadcast: s has one element, gradient flows to both
Tensor mul_scalar(const Tensor& x, const Tensor& s);

// ---- unary ----
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact Gaussian-CDF form
Tensor sigmoid(const Tensor& x);
Tensor exp_(const Tensor& x);
Tensor log_(const Tensor& x);
Tensor sqrt_(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// ---- reductions ----
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor dot(const Tensor& a, const Tensor& b);  // -> [1]

// ---- layout ----
Tensor transpose2d(const Tensor& x);
Tensor rows(const Tensor& x, int r0, int r1);      // row block [r0, r1)
Tensor cols(const Tensor& x, int c0, int c1);      // column block [c0, c1)
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor pad_cols(const Tensor& x, int left, int right);  // zero pad along time
// Regroup blocked columns: input column a*B + b maps to output column b*A + a.
Tensor col_interleave(const Tensor& x, int A, int B);
// Linear resampling along columns to L_out (center-aligned sample positions).
Tensor resample_cols(const Tensor& x, int L_out);
Tensor add_bias(const Tensor& x, const Tensor& b);  // b[R] added to each column
Tensor mean_cols(const Tensor& x);                  // [R,C] -> [R,1]

// ---- matmul: C = op(A) · op(B), 2-D only, BLAS-backed ----
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);

// ---- convolution family (valid padding) ----
// x[Ci,T], w[Co,Ci,K] -> [Co, L], L = floor((T - dilation*(K-1) - 1)/stride) + 1
Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int dilation = 1);
// y[Ci,L], w[Ci,Co,K] -> [Co, (L-1)*stride + K]; adjoint of conv1d
Tensor conv1d_transpose(const Tensor& y, const Tensor& w, int stride);
// x[C,T], w[C,Kd] (Kd odd) -> [C,T], zero same-padding, per-channel kernels
Tensor depthwise_conv1d(const Tensor& x, const Tensor& w);

// ---- normalization / activations over structured axes ----
Tensor softmax(const Tensor& x, int axis);
// x[D,L] normalized per column over the D rows (population variance), then
// affine with gamma[D], beta[D].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// ---- fused scaled-dot-product attention ----
// q[D,Lq], k[D,Lk], v[D,Lk] -> [D,Lq]. Heads partition the D rows; scores are
// scale * Q_h^T K_h, row-softmaxed. Probabilities are recomputed during
// backward rather than stored.
Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           int heads, double scale);
// Attention probabilities [Lq, Lk] for head `head`; inspection helper, not
// recorded on any tape.
Tensor attention_probs(const Tensor& q, const Tensor& k, int heads,
                       double scale, int head);

// ---- chunking (dual-path segmentation) ----
struct ChunkInfo {
  int chunk = 0;      // C
  int hop = 0;        // C/2
  int pad_front = 0;  // C/2
  int pad_back = 0;
  int n_chunks = 0;   // I
  int orig_len = 0;   // L
};
// [D, L] -> [D, I*C], chunk-major: output column i*C + c is padded-input
// position i*hop + c. Pads C/2 in front and minimally at the tail.
Tensor chunk(const Tensor& x, int C, ChunkInfo* info);
// Inverse: sum overlapping windows, divide by coverage count, strip padding.
Tensor overlap_add(const Tensor& x, const ChunkInfo& info);

// ---- pooling ----
Tensor maxpool_cols(const Tensor& x, int window, int stride);

// Number of BLAS worker threads (kept at 1; parallelism lives at the
// sample/branch level).
void init_numerics();

}  // namespace avfs

#endif  // AVFS_OPS_H_

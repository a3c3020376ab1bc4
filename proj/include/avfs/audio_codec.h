// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_AUDIO_CODEC_H_
#define AVFS_AUDIO_CODEC_H_

#include <string>
#include <vector>

#include "avfs/nn.h"
#include "avfs/tensor.h"

namespace avfs {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;
};

Tensor waveform_to_tensor(const Waveform& w);  // [1, T]
Waveform tensor_to_waveform(const Tensor& t, int sample_rate);

struct EncodedAudio {
  Tensor features;  // [D, L]
  int frame_kernel = 0;
  int frame_stride = 0;
};

// Time-domain front-end: 1->D conv with kernel K, stride K/2, bias-free,
// ReLU on top.
class AudioFrontEnd {
 public:
  AudioFrontEnd() = default;
  AudioFrontEnd(int dim, int kernel, Rng& rng);
  EncodedAudio encode(const Tensor& x) const;  // x [1, T], T >= K
  void collect(const std::string& prefix, ParamList* out) const;

  Tensor w;  // [D, 1, K]
  int kernel = 0;
};

// Transposed-conv reconstruction of the masked feature map back to a
// waveform, truncated or zero-padded to the requested length.
class AudioDecoder {
 public:
  AudioDecoder() = default;
  AudioDecoder(int dim, int kernel, Rng& rng);
  Tensor decode(const Tensor& mask, const EncodedAudio& h, int target_len) const;
  void collect(const std::string& prefix, ParamList* out) const;

  Tensor w;  // [D, 1, K]
  int kernel = 0;
};

}  // namespace avfs

#endif  // AVFS_AUDIO_CODEC_H_

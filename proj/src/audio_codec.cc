// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/audio_codec.h"

#include "avfs/ops.h"

namespace avfs {

Tensor waveform_to_tensor(const Waveform& w) {
  AVFS_CHECK(!w.samples.empty(), "waveform is empty");
  return Tensor({1, static_cast<int>(w.samples.size())}, w.samples);
}

Waveform tensor_to_waveform(const Tensor& t, int sample_rate) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(t.data(), t.data() + t.numel());
  return w;
}

AudioFrontEnd::AudioFrontEnd(int dim, int kernel, Rng& rng) : kernel(kernel) {
  AVFS_CHECK(kernel % 2 == 0, "front-end kernel must be even, got ", kernel);
  w = glorot({dim, 1, kernel}, rng);
}

EncodedAudio AudioFrontEnd::encode(const Tensor& x) const {
  AVFS_CHECK(x.ndim() == 2 && x.dim(0) == 1, "front-end expects [1,T], got ",
             shape_str(x.shape()));
  if (x.dim(1) < kernel)
    throw ShapeError(str_cat("front-end input too short: T=", x.dim(1),
                             " < K=", kernel));
  EncodedAudio out;
  out.frame_kernel = kernel;
  out.frame_stride = kernel / 2;
  out.features = relu(conv1d(x, w, kernel / 2));
  return out;
}

void AudioFrontEnd::collect(const std::string& prefix, ParamList* out) const {
  out->push_back({prefix + ".w", w});
}

AudioDecoder::AudioDecoder(int dim, int kernel, Rng& rng) : kernel(kernel) {
  w = glorot({dim, 1, kernel}, rng);
}

Tensor AudioDecoder::decode(const Tensor& mask, const EncodedAudio& h,
                            int target_len) const {
  AVFS_CHECK(same_shape(mask.shape(), h.features.shape()),
             "decode: mask ", shape_str(mask.shape()), " vs features ",
             shape_str(h.features.shape()));
  Tensor gated = mul(mask, h.features);
  Tensor wav = conv1d_transpose(gated, w, kernel / 2);  // [1, (L-1)*K/2 + K]
  int t = wav.dim(1);
  if (t > target_len) return cols(wav, 0, target_len);
  if (t < target_len) return pad_cols(wav, 0, target_len - t);
  return wav;
}

void AudioDecoder::collect(const std::string& prefix, ParamList* out) const {
  out->push_back({prefix + ".w", w});
}

}  // namespace avfs

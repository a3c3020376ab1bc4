// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_DATA_SYNTH_H_
#define AVFS_DATA_SYNTH_H_

#include <optional>
#include <string>
#include <vector>

#include "avfs/audio_codec.h"
#include "avfs/visual_frontend.h"

namespace avfs {

// ---- WAV I/O (RIFF PCM16 mono) ----
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// ---- visual stream binary I/O ----
// Header: magic "AVFS", u32 F_v, u32 frame_rate, u32 I_raw; payload is
// little-endian f32, row-major [F_v, I_raw].
VisualStream read_visual(const std::string& path);
void write_visual(const std::string& path, const VisualStream& v);

// ---- procedural speakers ----

struct SpeakerSample {
  Waveform wav;
  VisualStream visual;
  double f0 = 0.0;
  int band = 0;
};

// Harmonic tone stack with a speaker-specific fundamental, amplitude
// modulated by a smooth envelope with silent gaps. The visual stream carries
// [envelope, 4-dim identity code, 3-dim noise] per frame at 25 fps.
SpeakerSample gen_speaker(uint64_t seed, double duration_s, int sample_rate);

// Fundamental bands, disjoint per branch slot.
int speaker_band(uint64_t seed);

// ---- mixing ----

struct MixResult {
  Waveform mixture;
  std::vector<Waveform> scaled_sources;  // post mix-gain and normalization
  double norm_gain = 1.0;
};

// Scales interferers against sources[0] to the requested SNRs (dB), adds
// optional white noise, sums and peak-normalizes; the same total gain is
// applied to the stored sources.
MixResult mix(const std::vector<Waveform>& sources,
              const std::vector<double>& snr_dbs,
              std::optional<double> noise_snr_db, Rng& rng);

// ---- dataset building ----

struct DatasetConfig {
  std::string name = "desk-2mix";
  std::string out_dir;
  int n_train = 2000, n_valid = 200, n_test = 200;
  int n_speakers_m = 2;         // M: visual streams per sample
  std::vector<int> n_choices = {2};  // N drawn uniformly from these
  int sample_rate = 8000;
  double duration_s = 2.0;
  double snr_lo = -10.0, snr_hi = 10.0;
  std::optional<double> noise_snr_db = 30.0;
  uint64_t seed = 1;
};

struct SampleEntry {
  std::string id;
  std::string mixture_path;
  std::vector<std::string> source_paths;  // empty string for inactive slots
  std::vector<std::string> visual_paths;  // length M
  std::vector<bool> active;               // length M
  int n_active = 0;
  std::vector<double> snr_dbs;
  std::optional<double> noise_snr_db;
  uint64_t seed = 0;
};

struct Manifest {
  std::string name;
  int sample_rate = 8000;
  double duration_s = 2.0;
  int m = 2;
  uint64_t seed = 1;
  std::vector<SampleEntry> train, valid, test;

  const std::vector<SampleEntry>& split(const std::string& s) const;
};

Manifest build_dataset(const DatasetConfig& cfg);
std::string manifest_path(const std::string& out_dir);
void write_manifest(const Manifest& m, const std::string& path);
Manifest read_manifest(const std::string& path);

// Loaded sample ready for the model.
struct LoadedSample {
  Waveform mixture;
  std::vector<Waveform> sources;      // aligned with slots; empty when inactive
  std::vector<VisualStream> visuals;  // length M
  std::vector<bool> active;
  std::string id;
};

LoadedSample load_sample(const SampleEntry& e);

}  // namespace avfs

#endif  // AVFS_DATA_SYNTH_H_

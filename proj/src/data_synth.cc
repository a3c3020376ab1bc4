// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/data_synth.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace avfs {

// ------------------------------------------------------------------ WAV I/O

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0]) | (static_cast<uint16_t>(p[1]) << 8);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(str_cat("cannot open ", path));
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(str_cat("cannot write ", path));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError(str_cat("short write to ", path));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::string raw = read_file(path);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 ||
      std::memcmp(p + 8, "WAVE", 4) != 0)
    throw IoError(str_cat("not a RIFF/WAVE file: ", path));
  size_t off = 12;
  bool have_fmt = false;
  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  Waveform w;
  bool have_data = false;
  while (off + 8 <= raw.size()) {
    uint32_t sz = get_u32(p + off + 4);
    const unsigned char* body = p + off + 8;
    if (off + 8 + sz > raw.size())
      throw IoError(str_cat("truncated chunk in ", path));
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (sz < 16) throw IoError(str_cat("malformed fmt chunk in ", path));
      format = get_u16(body);
      channels = get_u16(body + 2);
      rate = get_u32(body + 4);
      bits = get_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      if (!have_fmt) throw IoError(str_cat("data chunk before fmt in ", path));
      if (format != 1)
        throw IoError(str_cat("unsupported audio_format ", format, " in ", path,
                              " (PCM required)"));
      if (channels != 1)
        throw IoError(str_cat("unsupported channels ", channels, " in ", path,
                              " (mono required)"));
      if (bits != 16)
        throw IoError(str_cat("unsupported bits_per_sample ", bits, " in ",
                              path, " (16 required)"));
      size_t n = sz / 2;
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t s = static_cast<int16_t>(get_u16(body + 2 * i));
        w.samples[i] = static_cast<double>(s) / 32768.0;
      }
      w.sample_rate = static_cast<int>(rate);
      have_data = true;
    }
    off += 8 + sz + (sz & 1);
  }
  if (!have_data) throw IoError(str_cat("no data chunk in ", path));
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  AVFS_CHECK(w.sample_rate > 0, "write_wav: sample_rate must be positive");
  std::string out;
  uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(w.sample_rate));
  put_u32(out, static_cast<uint32_t>(w.sample_rate * 2));  // byte rate
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits
  out += "data";
  put_u32(out, data_bytes);
  for (double v : w.samples) {
    double c = std::min(std::max(v, -1.0), 1.0);
    int16_t s = static_cast<int16_t>(std::lrint(c * 32767.0));
    put_u16(out, static_cast<uint16_t>(s));
  }
  write_file(path, out);
}

// --------------------------------------------------------------- visual I/O

VisualStream read_visual(const std::string& path) {
  std::string raw = read_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), "AVFS", 4) != 0)
    throw IoError(str_cat("bad magic in visual file ", path));
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  uint32_t fv = get_u32(p + 4), rate = get_u32(p + 8), iraw = get_u32(p + 12);
  if (fv == 0 || iraw == 0)
    throw IoError(str_cat("empty visual stream in ", path));
  size_t want = 16 + static_cast<size_t>(fv) * iraw * 4;
  if (raw.size() != want)
    throw IoError(str_cat("visual payload size mismatch in ", path, ": have ",
                          raw.size(), " bytes, header implies ", want));
  VisualStream v;
  v.frame_rate = static_cast<int>(rate);
  v.frames = Tensor({static_cast<int>(fv), static_cast<int>(iraw)});
  const unsigned char* body = p + 16;
  for (size_t i = 0; i < static_cast<size_t>(fv) * iraw; ++i) {
    uint32_t bits = get_u32(body + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    v.frames.data()[i] = static_cast<double>(f);
  }
  return v;
}

void write_visual(const std::string& path, const VisualStream& v) {
  AVFS_CHECK(v.frames.defined() && v.frames.ndim() == 2, "write_visual: bad frames");
  std::string out = "AVFS";
  put_u32(out, static_cast<uint32_t>(v.frames.dim(0)));
  put_u32(out, static_cast<uint32_t>(v.frame_rate));
  put_u32(out, static_cast<uint32_t>(v.frames.dim(1)));
  for (int64_t i = 0; i < v.frames.numel(); ++i) {
    float f = static_cast<float>(v.frames.data()[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  write_file(path, out);
}

// ---------------------------------------------------------- speaker synth

namespace {
constexpr double kBands[3][2] = {{100.0, 150.0}, {160.0, 220.0}, {240.0, 320.0}};
constexpr int kHarmonics = 4;
constexpr int kVisualRate = 25;
constexpr int kVisualDim = 8;  // envelope + 4 id + 3 noise
constexpr double kPeak = 0.95;
}  // namespace

int speaker_band(uint64_t seed) { return static_cast<int>(seed % 3); }

SpeakerSample gen_speaker(uint64_t seed, double duration_s, int sample_rate) {
  AVFS_CHECK(duration_s >= 0.5, "speaker duration must be >= 0.5 s");
  Rng rng(derive_seed(seed, 0xa11d10));
  SpeakerSample out;
  out.band = speaker_band(seed);
  out.f0 = rng.uniform(kBands[out.band][0], kBands[out.band][1]);

  int n_frames = static_cast<int>(std::lround(duration_s * kVisualRate));
  int t_total = static_cast<int>(std::lround(duration_s * sample_rate));

  // smooth envelope at video frame rate
  std::vector<double> env(static_cast<size_t>(n_frames));
  for (auto& e : env) e = rng.uniform(0.3, 1.0);
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> sm(env.size());
    for (int i = 0; i < n_frames; ++i) {
      double s = 0.0;
      int cnt = 0;
      for (int k = -2; k <= 2; ++k) {
        int j = i + k;
        if (j >= 0 && j < n_frames) {
          s += env[static_cast<size_t>(j)];
          ++cnt;
        }
      }
      sm[static_cast<size_t>(i)] = s / cnt;
    }
    env.swap(sm);
  }
  // silent gaps totalling 10-30% of the frames
  double gap_frac = rng.uniform(0.10, 0.30);
  int n_gaps = 1 + rng.uniform_int(3);
  int gap_len = std::max(1, static_cast<int>(gap_frac * n_frames / n_gaps));
  for (int g = 0; g < n_gaps; ++g) {
    int start = rng.uniform_int(std::max(1, n_frames - gap_len));
    for (int i = start; i < std::min(n_frames, start + gap_len); ++i)
      env[static_cast<size_t>(i)] = 0.0;
  }

  // harmonic stack modulated by the envelope (linear interp at frame centers)
  std::vector<double> phase(kHarmonics);
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);
  out.wav.sample_rate = sample_rate;
  out.wav.samples.resize(static_cast<size_t>(t_total));
  double peak = 0.0;
  for (int t = 0; t < t_total; ++t) {
    double pos = (static_cast<double>(t) / sample_rate) * kVisualRate - 0.5;
    double e;
    if (pos <= 0.0) {
      e = env[0];
    } else if (pos >= n_frames - 1) {
      e = env[static_cast<size_t>(n_frames - 1)];
    } else {
      int i0 = static_cast<int>(pos);
      double fr = pos - i0;
      e = (1.0 - fr) * env[static_cast<size_t>(i0)] + fr * env[static_cast<size_t>(i0 + 1)];
    }
    double s = 0.0;
    for (int h = 0; h < kHarmonics; ++h)
      s += std::sin(2.0 * M_PI * out.f0 * (h + 1) * t / sample_rate + phase[static_cast<size_t>(h)]) /
           (h + 1);
    double v = e * s;
    out.wav.samples[static_cast<size_t>(t)] = v;
    peak = std::max(peak, std::fabs(v));
  }
  if (peak > 0.0)
    for (auto& v : out.wav.samples) v *= kPeak / peak;

  // visual stream: envelope + stable identity code + noise
  Rng idrng(derive_seed(seed, 0x1dc0de));
  double code[4];
  for (auto& c : code) c = idrng.uniform(-1.0, 1.0);
  out.visual.frame_rate = kVisualRate;
  out.visual.frames = Tensor({kVisualDim, n_frames});
  double* f = out.visual.frames.data();
  for (int i = 0; i < n_frames; ++i) {
    f[i] = env[static_cast<size_t>(i)];
    for (int c = 0; c < 4; ++c) f[(1 + c) * n_frames + i] = code[c];
    for (int c = 0; c < 3; ++c) f[(5 + c) * n_frames + i] = 0.1 * rng.normal();
  }
  return out;
}

// ------------------------------------------------------------------- mixing

MixResult mix(const std::vector<Waveform>& sources,
              const std::vector<double>& snr_dbs,
              std::optional<double> noise_snr_db, Rng& rng) {
  AVFS_CHECK(!sources.empty(), "mix: no sources");
  AVFS_CHECK(snr_dbs.size() == sources.size() - 1,
             "mix: need one SNR per interferer, got ", snr_dbs.size(), " for ",
             sources.size() - 1);
  size_t t = sources[0].samples.size();
  std::vector<double> energies(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    AVFS_CHECK(sources[i].samples.size() == t, "mix: length mismatch");
    double e = 0.0;
    for (double v : sources[i].samples) e += v * v;
    if (e <= 0.0)
      throw ContractError(str_cat("mix: source ", i, " has zero energy"));
    energies[i] = e;
  }
  std::vector<double> gains(sources.size(), 1.0);
  for (size_t i = 1; i < sources.size(); ++i)
    gains[i] = std::sqrt(energies[0] /
                         (energies[i] * std::pow(10.0, snr_dbs[i - 1] / 10.0)));
  std::vector<double> x(t, 0.0);
  for (size_t i = 0; i < sources.size(); ++i)
    for (size_t j = 0; j < t; ++j) x[j] += gains[i] * sources[i].samples[j];
  if (noise_snr_db) {
    std::vector<double> n(t);
    double en = 0.0;
    for (auto& v : n) {
      v = rng.normal();
      en += v * v;
    }
    double target = energies[0] / std::pow(10.0, *noise_snr_db / 10.0);
    double g = en > 0.0 ? std::sqrt(target / en) : 0.0;
    for (size_t j = 0; j < t; ++j) x[j] += g * n[j];
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  double gnorm = peak > 0.0 ? kPeak / peak : 1.0;
  MixResult out;
  out.norm_gain = gnorm;
  out.mixture.sample_rate = sources[0].sample_rate;
  out.mixture.samples.resize(t);
  for (size_t j = 0; j < t; ++j) out.mixture.samples[j] = x[j] * gnorm;
  out.scaled_sources.resize(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    out.scaled_sources[i].sample_rate = sources[i].sample_rate;
    out.scaled_sources[i].samples.resize(t);
    for (size_t j = 0; j < t; ++j)
      out.scaled_sources[i].samples[j] = gains[i] * gnorm * sources[i].samples[j];
  }
  return out;
}

// ----------------------------------------------------------------- dataset

namespace {

constexpr int kSpeakerPool = 100;  // per band per split

uint64_t speaker_seed(uint64_t cfg_seed, int split_id, int pool_idx, int band) {
  uint64_t raw = static_cast<uint64_t>(split_id) * 1000000ULL + static_cast<uint64_t>(pool_idx);
  return cfg_seed * 30000000ULL + 3ULL * raw + static_cast<uint64_t>(band);
}

SampleEntry make_sample(const DatasetConfig& cfg, int split_id,
                        const std::string& split_name, int idx,
                        const std::string& split_dir) {
  uint64_t sample_seed = derive_seed(cfg.seed, static_cast<uint64_t>(split_id),
                                     static_cast<uint64_t>(idx));
  Rng rng(sample_seed);
  int m = cfg.n_speakers_m;
  int n = cfg.n_choices[static_cast<size_t>(rng.uniform_int(
      static_cast<int>(cfg.n_choices.size())))];
  AVFS_CHECK(n >= 1 && n <= m, "dataset: need 1 <= N <= M, got N=", n,
             " M=", m);
  // choose N active slots
  std::vector<int> slots(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) slots[static_cast<size_t>(i)] = i;
  for (int i = m - 1; i > 0; --i)
    std::swap(slots[static_cast<size_t>(i)], slots[static_cast<size_t>(rng.uniform_int(i + 1))]);
  std::vector<bool> active(static_cast<size_t>(m), false);
  for (int i = 0; i < n; ++i) active[static_cast<size_t>(slots[static_cast<size_t>(i)])] = true;

  // one speaker per slot; phantom slots carry a speaker absent from the mix
  std::vector<SpeakerSample> speakers;
  speakers.reserve(static_cast<size_t>(m));
  for (int b = 0; b < m; ++b) {
    int pool_idx = rng.uniform_int(kSpeakerPool);
    speakers.push_back(gen_speaker(speaker_seed(cfg.seed, split_id, pool_idx, b % 3),
                                   cfg.duration_s, cfg.sample_rate));
  }

  // draw SNRs for interferers (relative to the first active source)
  std::vector<Waveform> sources;
  std::vector<double> snrs;
  for (int b = 0; b < m; ++b) {
    if (!active[static_cast<size_t>(b)]) continue;
    if (!sources.empty()) snrs.push_back(rng.uniform(cfg.snr_lo, cfg.snr_hi));
    sources.push_back(speakers[static_cast<size_t>(b)].wav);
  }
  MixResult mr = mix(sources, snrs, cfg.noise_snr_db, rng);

  char id[32];
  std::snprintf(id, sizeof(id), "%s_%05d", split_name.c_str(), idx);
  std::string dir = split_dir + "/" + id;
  fs::create_directories(dir);

  SampleEntry e;
  e.id = id;
  e.seed = sample_seed;
  e.n_active = n;
  e.active = active;
  e.snr_dbs = snrs;
  e.noise_snr_db = cfg.noise_snr_db;
  e.mixture_path = dir + "/mix.wav";
  write_wav(e.mixture_path, mr.mixture);
  e.source_paths.assign(static_cast<size_t>(m), "");
  e.visual_paths.resize(static_cast<size_t>(m));
  int src_i = 0;
  for (int b = 0; b < m; ++b) {
    if (active[static_cast<size_t>(b)]) {
      e.source_paths[static_cast<size_t>(b)] = dir + "/s" + std::to_string(b) + ".wav";
      write_wav(e.source_paths[static_cast<size_t>(b)],
                mr.scaled_sources[static_cast<size_t>(src_i++)]);
    }
    e.visual_paths[static_cast<size_t>(b)] = dir + "/v" + std::to_string(b) + ".bin";
    write_visual(e.visual_paths[static_cast<size_t>(b)],
                 speakers[static_cast<size_t>(b)].visual);
  }
  return e;
}

}  // namespace

const std::vector<SampleEntry>& Manifest::split(const std::string& s) const {
  if (s == "train") return train;
  if (s == "valid") return valid;
  if (s == "test") return test;
  throw ConfigError(str_cat("unknown split '", s, "'"));
}

Manifest build_dataset(const DatasetConfig& cfg) {
  AVFS_CHECK(!cfg.out_dir.empty(), "dataset: out_dir required");
  AVFS_CHECK(cfg.n_speakers_m >= 1, "dataset: M must be >= 1");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError(str_cat("cannot create ", cfg.out_dir, ": ", ec.message()));
  Manifest man;
  man.name = cfg.name;
  man.sample_rate = cfg.sample_rate;
  man.duration_s = cfg.duration_s;
  man.m = cfg.n_speakers_m;
  man.seed = cfg.seed;
  struct SplitSpec {
    const char* name;
    int id;
    int count;
    std::vector<SampleEntry>* out;
  };
  SplitSpec specs[] = {{"train", 0, cfg.n_train, &man.train},
                       {"valid", 1, cfg.n_valid, &man.valid},
                       {"test", 2, cfg.n_test, &man.test}};
  for (auto& sp : specs) {
    std::string dir = cfg.out_dir + "/" + sp.name;
    fs::create_directories(dir);
    for (int i = 0; i < sp.count; ++i)
      sp.out->push_back(make_sample(cfg, sp.id, sp.name, i, dir));
  }
  write_manifest(man, manifest_path(cfg.out_dir));
  return man;
}

std::string manifest_path(const std::string& out_dir) {
  return out_dir + "/manifest.json";
}

namespace {

json entry_to_json(const SampleEntry& e) {
  json j;
  j["id"] = e.id;
  j["mixture"] = e.mixture_path;
  j["sources"] = e.source_paths;
  j["visuals"] = e.visual_paths;
  j["active"] = std::vector<int>(e.active.begin(), e.active.end());
  j["n_active"] = e.n_active;
  j["snr_dbs"] = e.snr_dbs;
  if (e.noise_snr_db) j["noise_snr_db"] = *e.noise_snr_db;
  j["seed"] = e.seed;
  return j;
}

SampleEntry entry_from_json(const json& j) {
  SampleEntry e;
  e.id = j.at("id").get<std::string>();
  e.mixture_path = j.at("mixture").get<std::string>();
  e.source_paths = j.at("sources").get<std::vector<std::string>>();
  e.visual_paths = j.at("visuals").get<std::vector<std::string>>();
  for (int v : j.at("active").get<std::vector<int>>()) e.active.push_back(v != 0);
  e.n_active = j.at("n_active").get<int>();
  e.snr_dbs = j.at("snr_dbs").get<std::vector<double>>();
  if (j.contains("noise_snr_db")) e.noise_snr_db = j.at("noise_snr_db").get<double>();
  e.seed = j.at("seed").get<uint64_t>();
  return e;
}

}  // namespace

void write_manifest(const Manifest& m, const std::string& path) {
  json j;
  j["name"] = m.name;
  j["sample_rate"] = m.sample_rate;
  j["duration_s"] = m.duration_s;
  j["m"] = m.m;
  j["seed"] = m.seed;
  for (const char* split : {"train", "valid", "test"}) {
    json arr = json::array();
    for (const auto& e : m.split(split)) arr.push_back(entry_to_json(e));
    j[split] = std::move(arr);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(str_cat("cannot write manifest ", path));
  out << j.dump(1) << "\n";
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(str_cat("cannot open manifest ", path));
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError(str_cat("malformed manifest ", path, ": ", e.what()));
  }
  Manifest m;
  m.name = j.at("name").get<std::string>();
  m.sample_rate = j.at("sample_rate").get<int>();
  m.duration_s = j.at("duration_s").get<double>();
  m.m = j.at("m").get<int>();
  m.seed = j.at("seed").get<uint64_t>();
  for (const auto& e : j.at("train")) m.train.push_back(entry_from_json(e));
  for (const auto& e : j.at("valid")) m.valid.push_back(entry_from_json(e));
  for (const auto& e : j.at("test")) m.test.push_back(entry_from_json(e));
  return m;
}

LoadedSample load_sample(const SampleEntry& e) {
  LoadedSample s;
  s.id = e.id;
  s.mixture = read_wav(e.mixture_path);
  s.active = e.active;
  s.sources.resize(e.source_paths.size());
  for (size_t i = 0; i < e.source_paths.size(); ++i)
    if (!e.source_paths[i].empty()) s.sources[i] = read_wav(e.source_paths[i]);
  for (const auto& p : e.visual_paths) s.visuals.push_back(read_visual(p));
  return s;
}

}  // namespace avfs

#pragma once

/**
 * @file audio_features.hpp
 * @brief WAV decoding, MFCC extraction and per-utterance CMVN.
 *
 * Processing pipeline:
 * 1. Pre-emphasis over the whole clip
 * 2. Framing with a Hamming window
 * 3. FFT -> magnitude spectrum
 * 4. Triangular mel filterbank (mel-domain triangles) -> log energies
 * 5. Orthonormal DCT-II keeping the first `num_ceps` coefficients (C0 included)
 * 6. Optional delta / delta-delta appending
 */

#include <fftw3.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sstd/error.hpp"
#include "sstd/util.hpp"

namespace sstd {

struct AudioClip {
  std::vector<float> samples;  ///< mono, in [-1, 1]
  int sample_rate = 16000;
  std::string id;
  std::string speaker;
};

struct FeatureConfig {
  double window_s = 0.025;
  double hop_s = 0.010;
  double preemphasis = 0.97;
  int num_filters = 26;
  double low_hz = 0.0;
  double high_hz = 0.0;  ///< 0 means Nyquist
  int num_ceps = 13;
  int fft_size = 0;  ///< 0 means next power of two >= window
  bool append_deltas = false;
  bool use_power = false;  ///< power instead of magnitude spectrum
  double log_floor = 1e-10;
};

/// Row-major frames x dim matrix of acoustic features for one utterance.
struct FeatureMatrix {
  std::string utterance_id;
  std::size_t dim = 0;
  std::vector<float> data;
  double frame_shift_s = 0.010;
  double frame_length_s = 0.025;

  std::size_t frames() const { return dim == 0 ? 0 : data.size() / dim; }
  bool empty() const { return frames() == 0; }

  std::span<const float> frame(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<float> frame(std::size_t t) { return {data.data() + t * dim, dim}; }

  void append(std::span<const float> row) {
    if (dim == 0) dim = row.size();
    if (row.size() != dim) throw Error(Errc::dimension_mismatch, "frame dimension changed");
    data.insert(data.end(), row.begin(), row.end());
  }

  /// Frames [begin, end) as a new matrix.
  FeatureMatrix slice(std::size_t begin, std::size_t end) const {
    FeatureMatrix out{utterance_id, dim, {}, frame_shift_s, frame_length_s};
    out.data.assign(data.begin() + static_cast<std::ptrdiff_t>(begin * dim),
                    data.begin() + static_cast<std::ptrdiff_t>(end * dim));
    return out;
  }

  static FeatureMatrix from_rows(const std::vector<std::vector<float>>& rows, std::string id = {}) {
    FeatureMatrix m;
    m.utterance_id = std::move(id);
    for (const auto& r : rows) m.append(r);
    return m;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// 1 + floor((num_samples - window) / hop) when num_samples >= window, else 0.
constexpr std::size_t frame_count(std::size_t num_samples, std::size_t window, std::size_t hop) {
  if (window == 0 || hop == 0 || num_samples < window) return 0;
  return 1 + (num_samples - window) / hop;
}

namespace detail {

inline std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void wr_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}
inline void wr_u32(std::string& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}
inline void wr_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  wr_u32(out, bits);
}
inline float rd_f32(const unsigned char* p) {
  const std::uint32_t bits = rd_u32(p);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_, static_cast<std::size_t>(n_)}; }

  /// Magnitude (or power) of bins 0..n/2.
  void spectrum(std::vector<double>& out, bool power) {
    fftw_execute(plan_);
    out.resize(static_cast<std::size_t>(n_ / 2 + 1));
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double p = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
      out[k] = power ? p : std::sqrt(p);
    }
  }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace detail

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
/// Multichannel audio is averaged to mono; 16-bit values are divided by 32768.
inline AudioClip load_audio(const std::filesystem::path& path) {
  const std::string bytes = util::read_text_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw Error(Errc::unsupported_format, path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* chunk = p + pos;
    const std::size_t len = detail::rd_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(len, n - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw Error(Errc::unsupported_format, path.string() + ": short fmt chunk");
      format = detail::rd_u16(p + body);
      channels = detail::rd_u16(p + body + 2);
      rate = detail::rd_u32(p + body + 4);
      bits = detail::rd_u16(p + body + 14);
      if (format == 0xFFFE && avail >= 26) format = detail::rd_u16(p + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = p + body;
      data_len = avail;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw Error(Errc::unsupported_format, path.string() + ": missing fmt chunk");
  if (!data || data_len == 0) throw Error(Errc::unsupported_format, path.string() + ": empty data chunk");
  if (channels == 0 || rate == 0) throw Error(Errc::unsupported_format, path.string() + ": bad header");

  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32)
    throw Error(Errc::unsupported_format, path.string() + ": codec " + std::to_string(format) + " / " +
                                              std::to_string(bits) + "-bit not supported");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_len / (bytes_per_sample * channels);
  if (frames == 0) throw Error(Errc::unsupported_format, path.string() + ": empty data chunk");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.id = path.stem().string();
  clip.samples.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = data + (t * channels + c) * bytes_per_sample;
      acc += pcm16 ? static_cast<std::int16_t>(detail::rd_u16(s)) / 32768.0 : detail::rd_f32(s);
    }
    clip.samples[t] = static_cast<float>(acc / channels);
  }
  return clip;
}

/// Writes interleaved samples as a WAV file (16-bit PCM or 32-bit float).
inline void write_wav(const std::filesystem::path& path, std::span<const float> interleaved, int sample_rate,
                      int channels = 1, bool float32 = false) {
  const std::uint16_t bits = float32 ? 32 : 16;
  const std::uint32_t data_len = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));
  std::string out = "RIFF";
  detail::wr_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::wr_u32(out, 16);
  detail::wr_u16(out, float32 ? 3 : 1);
  detail::wr_u16(out, static_cast<std::uint16_t>(channels));
  detail::wr_u32(out, static_cast<std::uint32_t>(sample_rate));
  detail::wr_u32(out, static_cast<std::uint32_t>(sample_rate * channels * (bits / 8)));
  detail::wr_u16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  detail::wr_u16(out, bits);
  out += "data";
  detail::wr_u32(out, data_len);
  for (float s : interleaved) {
    if (float32) {
      detail::wr_f32(out, s);
    } else {
      const double scaled = std::round(static_cast<double>(s) * 32768.0);
      detail::wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0))));
    }
  }
  util::write_text_file(path, out);
}

/// Regression deltas over +-2 frames, edges clamped.
inline std::vector<std::vector<double>> deltas(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  std::vector<std::vector<double>> out(rows.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    out[static_cast<std::size_t>(t)].assign(rows.empty() ? 0 : rows[0].size(), 0.0);
    for (std::size_t d = 0; d < out[static_cast<std::size_t>(t)].size(); ++d) {
      double acc = 0.0;
      for (std::ptrdiff_t k = 1; k <= 2; ++k) {
        const auto next = static_cast<std::size_t>(std::min(t + k, n - 1));
        const auto prev = static_cast<std::size_t>(std::max(t - k, std::ptrdiff_t{0}));
        acc += static_cast<double>(k) * (rows[next][d] - rows[prev][d]);
      }
      out[static_cast<std::size_t>(t)][d] = acc / 10.0;
    }
  }
  return out;
}

inline FeatureMatrix mfcc(const AudioClip& clip, const FeatureConfig& config = {}) {
  if (clip.sample_rate <= 0) throw Error(Errc::invalid_argument, "sample_rate must be positive");
  if (config.num_filters < 1 || config.num_ceps < 1 || config.num_ceps > config.num_filters)
    throw Error(Errc::invalid_argument, "need 1 <= num_ceps <= num_filters");

  const auto window = static_cast<std::size_t>(std::lround(config.window_s * clip.sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(config.hop_s * clip.sample_rate));
  if (window == 0 || hop == 0) throw Error(Errc::invalid_argument, "window and hop must be >= 1 sample");
  if (clip.samples.size() < window)
    throw Error(Errc::clip_too_short, clip.id + ": " + std::to_string(clip.samples.size()) + " samples < window of " +
                                          std::to_string(window));

  int nfft = config.fft_size;
  if (nfft <= 0) {
    nfft = 1;
    while (static_cast<std::size_t>(nfft) < window) nfft *= 2;
  }
  if (static_cast<std::size_t>(nfft) < window) throw Error(Errc::invalid_argument, "fft_size smaller than window");

  std::vector<double> emph(clip.samples.size());
  emph[0] = clip.samples[0];
  for (std::size_t i = 1; i < emph.size(); ++i)
    emph[i] = static_cast<double>(clip.samples[i]) - config.preemphasis * clip.samples[i - 1];

  std::vector<double> hamming(window);
  for (std::size_t i = 0; i < window; ++i)
    hamming[i] = window == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (window - 1));

  const std::size_t bins = static_cast<std::size_t>(nfft / 2 + 1);
  const double nyquist = clip.sample_rate / 2.0;
  const double high = config.high_hz > 0 ? std::min(config.high_hz, nyquist) : nyquist;
  const double mel_lo = detail::hz_to_mel(config.low_hz);
  const double mel_hi = detail::hz_to_mel(high);
  const auto nf = static_cast<std::size_t>(config.num_filters);
  std::vector<double> edges(nf + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) edges[m] = mel_lo + (mel_hi - mel_lo) * m / (nf + 1);
  std::vector<std::vector<double>> fbank(nf, std::vector<double>(bins, 0.0));
  for (std::size_t k = 0; k < bins; ++k) {
    const double mel = detail::hz_to_mel(static_cast<double>(k) * clip.sample_rate / nfft);
    for (std::size_t m = 0; m < nf; ++m) {
      const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
      if (mel > l && mel < r) fbank[m][k] = mel <= c ? (mel - l) / (c - l) : (r - mel) / (r - c);
    }
  }

  const auto nc = static_cast<std::size_t>(config.num_ceps);
  std::vector<std::vector<double>> dct(nc, std::vector<double>(nf));
  for (std::size_t i = 0; i < nc; ++i) {
    const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / nf);
    for (std::size_t m = 0; m < nf; ++m) dct[i][m] = scale * std::cos(std::numbers::pi * i * (m + 0.5) / nf);
  }

  const std::size_t frames = frame_count(clip.samples.size(), window, hop);
  detail::RealFft fft(nfft);
  std::vector<double> spec;
  std::vector<double> logmel(nf);
  std::vector<std::vector<double>> ceps(frames, std::vector<double>(nc));
  for (std::size_t t = 0; t < frames; ++t) {
    auto in = fft.input();
    std::fill(in.begin(), in.end(), 0.0);
    for (std::size_t i = 0; i < window; ++i) in[i] = emph[t * hop + i] * hamming[i];
    fft.spectrum(spec, config.use_power);
    for (std::size_t m = 0; m < nf; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fbank[m][k] * spec[k];
      logmel[m] = std::log(std::max(e, config.log_floor));
    }
    for (std::size_t i = 0; i < nc; ++i) {
      double c = 0.0;
      for (std::size_t m = 0; m < nf; ++m) c += dct[i][m] * logmel[m];
      ceps[t][i] = c;
    }
  }

  std::vector<std::vector<double>> d1, d2;
  if (config.append_deltas) {
    d1 = deltas(ceps);
    d2 = deltas(d1);
  }

  FeatureMatrix out;
  out.utterance_id = clip.id;
  out.dim = config.append_deltas ? 3 * nc : nc;
  out.frame_shift_s = static_cast<double>(hop) / clip.sample_rate;
  out.frame_length_s = static_cast<double>(window) / clip.sample_rate;
  out.data.reserve(frames * out.dim);
  for (std::size_t t = 0; t < frames; ++t) {
    for (double v : ceps[t]) out.data.push_back(static_cast<float>(v));
    if (config.append_deltas) {
      for (double v : d1[t]) out.data.push_back(static_cast<float>(v));
      for (double v : d2[t]) out.data.push_back(static_cast<float>(v));
    }
  }
  return out;
}

inline constexpr double kVarianceFloor = 1e-10;

/// Per-utterance mean and variance normalization (population std).
/// Dimensions whose std falls below `floor` are divided by `floor`.
inline FeatureMatrix cmvn(const FeatureMatrix& features, double floor = kVarianceFloor) {
  const std::size_t n = features.frames();
  if (n < 2) throw Error(Errc::too_few_frames, features.utterance_id + ": cmvn needs at least 2 frames");
  FeatureMatrix out = features;
  for (std::size_t d = 0; d < features.dim; ++d) {
    const double first = features.frame(0)[d];
    bool constant = true;
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = features.frame(t)[d];
      sum += v;
      constant = constant && v == first;
    }
    const double mean = constant ? first : sum / n;
    double ss = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double dev = features.frame(t)[d] - mean;
      ss += dev * dev;
    }
    double sd = std::sqrt(ss / n);
    if (sd < floor) sd = floor;
    for (std::size_t t = 0; t < n; ++t) out.frame(t)[d] = static_cast<float>((features.frame(t)[d] - mean) / sd);
  }
  return out;
}

// Feature file: "SSTDFEAT", u32 version, u32 frames, u32 dim, f32 shift, f32 length,
// then frames*dim little-endian f32 values, row-major.
inline constexpr std::array<char, 8> kFeatureMagic{'S', 'S', 'T', 'D', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::string encode_features(const FeatureMatrix& m) {
  std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
  detail::wr_u32(out, kFeatureVersion);
  detail::wr_u32(out, static_cast<std::uint32_t>(m.frames()));
  detail::wr_u32(out, static_cast<std::uint32_t>(m.dim));
  detail::wr_f32(out, static_cast<float>(m.frame_shift_s));
  detail::wr_f32(out, static_cast<float>(m.frame_length_s));
  out.reserve(out.size() + m.data.size() * 4);
  for (float v : m.data) detail::wr_f32(out, v);
  return out;
}

inline FeatureMatrix decode_features(std::string_view bytes, std::string utterance_id) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 28 || bytes.substr(0, 8) != std::string_view(kFeatureMagic.data(), 8))
    throw Error(Errc::unsupported_format, utterance_id + ": not a feature file");
  if (detail::rd_u32(p + 8) != kFeatureVersion)
    throw Error(Errc::unsupported_format, utterance_id + ": unsupported feature file version");
  const std::size_t frames = detail::rd_u32(p + 12);
  const std::size_t dim = detail::rd_u32(p + 16);
  if (bytes.size() != 28 + frames * dim * 4)
    throw Error(Errc::parse_error, utterance_id + ": feature payload size does not match header");
  FeatureMatrix m;
  m.utterance_id = std::move(utterance_id);
  m.dim = dim;
  m.frame_shift_s = detail::rd_f32(p + 20);
  m.frame_length_s = detail::rd_f32(p + 24);
  m.data.resize(frames * dim);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = detail::rd_f32(p + 28 + 4 * i);
  return m;
}

inline void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  util::write_text_file(path, encode_features(m));
}

/// The utterance id is the file stem.
inline FeatureMatrix read_features(const std::filesystem::path& path) {
  return decode_features(util::read_text_file(path), path.stem().string());
}

}  // namespace sstd

#include "sqdr/signal_io.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "sqdr/error.h"
#include "sqdr/rng.h"

namespace sqdr {

namespace {

uint32_t ReadU32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t ReadU16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void PutU16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

int16_t Quantize(double x) {
  const double scaled = std::round(x * 32768.0);
  return static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

}  // namespace

AudioClip ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kNotAWav, where + ": missing RIFF/WAVE header");
  }

  bool have_fmt = false;
  int sample_rate = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t size = ReadU32(chunk + 4);
    const size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw Error(ErrorKind::kTruncatedFile, where + ": short fmt chunk");
      }
      const uint16_t format = ReadU16(bytes.data() + body);
      const uint16_t channels = ReadU16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(ReadU32(bytes.data() + body + 4));
      const uint16_t bits = ReadU16(bytes.data() + body + 14);
      if (format != 1) {
        throw Error(ErrorKind::kUnsupportedEncoding,
                    where + ": format tag " + std::to_string(format) +
                        " (need 1 = PCM)");
      }
      if (bits != 16) {
        throw Error(ErrorKind::kUnsupportedEncoding,
                    where + ": " + std::to_string(bits) +
                        " bits per sample (need 16)");
      }
      if (channels != 1) {
        throw Error(ErrorKind::kUnsupportedEncoding,
                    where + ": " + std::to_string(channels) +
                        " channels (need mono)");
      }
      if (sample_rate <= 0) {
        throw Error(ErrorKind::kUnsupportedEncoding, where + ": sample rate 0");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) {
        throw Error(ErrorKind::kNotAWav, where + ": data chunk before fmt");
      }
      if (body + size > bytes.size() || size % 2 != 0) {
        throw Error(ErrorKind::kTruncatedFile,
                    where + ": data chunk declares " + std::to_string(size) +
                        " bytes, " + std::to_string(bytes.size() - body) +
                        " present");
      }
      AudioClip clip;
      clip.sample_rate = sample_rate;
      clip.samples.resize(size / 2);
      for (size_t i = 0; i < clip.samples.size(); ++i) {
        const auto v = static_cast<int16_t>(ReadU16(bytes.data() + body + 2 * i));
        clip.samples[i] = v / 32768.0;
      }
      return clip;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw Error(ErrorKind::kNotAWav, where + ": no fmt chunk");
  throw Error(ErrorKind::kTruncatedFile, where + ": no data chunk");
}

void WriteWav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, static_cast<uint32_t>(clip.sample_rate));
  PutU32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (double x : clip.samples) PutU16(out, static_cast<uint16_t>(Quantize(x)));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

double Rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double Peak(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

double SnrGain(double speech_rms, double noise_rms, double snr_db) {
  return speech_rms / noise_rms * std::pow(10.0, -snr_db / 20.0);
}

AudioClip MixAtSnr(const AudioClip& speech, const AudioClip& noise,
                   const SnrMixSpec& spec) {
  if (speech.sample_rate != noise.sample_rate) {
    throw Error(ErrorKind::kSampleRateMismatch,
                std::to_string(speech.sample_rate) + " Hz speech vs " +
                    std::to_string(noise.sample_rate) + " Hz noise");
  }
  if (!std::isfinite(spec.snr_db)) {
    throw Error(ErrorKind::kOutOfRange, "snr_db must be finite");
  }
  if (noise.samples.empty()) {
    throw Error(ErrorKind::kZeroEnergy, "empty noise clip");
  }
  const size_t n = speech.samples.size();
  Rng rng(DeriveSeed(spec.seed, "mix-offset"));

  std::vector<double> crop(n);
  const size_t noise_len = noise.samples.size();
  if (noise_len >= n) {
    const size_t offset = rng.Below(noise_len - n + 1);
    std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(offset), n,
                crop.begin());
  } else {
    // Tile end-to-end, then crop at an offset within the first period.
    const size_t offset = rng.Below(noise_len);
    for (size_t i = 0; i < n; ++i) crop[i] = noise.samples[(offset + i) % noise_len];
  }

  const double speech_rms = Rms(speech.samples);
  const double noise_rms = Rms(crop);
  if (speech_rms == 0.0 || noise_rms == 0.0) {
    throw Error(ErrorKind::kZeroEnergy,
                speech_rms == 0.0 ? "speech has zero energy"
                                  : "noise crop has zero energy");
  }
  const double g = SnrGain(speech_rms, noise_rms, spec.snr_db);
  AudioClip out;
  out.sample_rate = speech.sample_rate;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) out.samples[i] = speech.samples[i] + g * crop[i];
  return out;
}

AudioClip ApplyTimeShift(const AudioClip& clip, double shift_ms) {
  const auto shift = static_cast<long>(
      std::lround(shift_ms * clip.sample_rate / 1000.0));
  const auto n = static_cast<long>(clip.samples.size());
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    const long src = i - shift;
    if (src >= 0 && src < n) out.samples[i] = clip.samples[src];
  }
  return out;
}

AudioClip AddWhiteNoise(const AudioClip& clip, double level_db, uint64_t seed) {
  const double peak = Peak(clip.samples);
  if (peak == 0.0) throw Error(ErrorKind::kZeroEnergy, "clip has zero peak");
  const double a = peak * std::pow(10.0, level_db / 20.0);
  Rng rng(seed);
  AudioClip out = clip;
  for (double& x : out.samples) x += a * rng.Uniform(-1.0, 1.0);
  return out;
}

size_t SecondsToSamples(double seconds, int sample_rate) {
  return static_cast<size_t>(std::llround(seconds * sample_rate));
}

size_t WindowCount(size_t n_samples, size_t window_samples,
                   size_t stride_samples) {
  if (window_samples > n_samples) return 0;
  return (n_samples - window_samples) / stride_samples + 1;
}

std::vector<LabeledWindow> WindowStream(const AudioClip& clip, double window_s,
                                        double stride_s) {
  const size_t win = SecondsToSamples(window_s, clip.sample_rate);
  const size_t stride = SecondsToSamples(stride_s, clip.sample_rate);
  if (win == 0 || stride == 0) {
    throw Error(ErrorKind::kOutOfRange, "window and stride must be positive");
  }
  if (win > clip.samples.size()) {
    throw Error(ErrorKind::kWindowTooLong,
                "window of " + std::to_string(win) + " samples exceeds clip of " +
                    std::to_string(clip.samples.size()));
  }
  const size_t count = WindowCount(clip.samples.size(), win, stride);
  std::vector<LabeledWindow> out(count);
  for (size_t k = 0; k < count; ++k) {
    const auto begin = clip.samples.begin() + static_cast<std::ptrdiff_t>(k * stride);
    out[k].samples.assign(begin, begin + static_cast<std::ptrdiff_t>(win));
    out[k].source_offset = static_cast<double>(k * stride) / clip.sample_rate;
  }
  return out;
}

namespace {

constexpr int kSynthRate = 16000;
constexpr size_t kSynthLen = 16000;

void AddNoiseFloor(std::vector<double>& x, Rng& rng, double sigma) {
  for (double& v : x) v += sigma * rng.Normal();
}

// One-pole filtered Gaussian noise scaled to the requested RMS. Negative
// coefficients tilt the spectrum upward, positive ones downward.
std::vector<double> ColoredNoise(Rng& rng, size_t n, double coef, double rms) {
  std::vector<double> y(n);
  double prev = 0.0;
  for (size_t i = 0; i < n; ++i) {
    prev = coef * prev + rng.Normal();
    y[i] = prev;
  }
  const double r = Rms(y);
  for (double& v : y) v *= rms / r;
  return y;
}

void AddToneBurst(std::vector<double>& x, Rng& rng) {
  const double freq = rng.Uniform(250.0, 4000.0);
  const double dur = rng.Uniform(0.1, 0.5);
  const double start = rng.Uniform(0.0, 1.0 - dur);
  const double amp = rng.Uniform(0.05, 0.3);
  const double phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const auto i0 = static_cast<size_t>(start * kSynthRate);
  const auto len = static_cast<size_t>(dur * kSynthRate);
  const size_t fade = 160;
  for (size_t k = 0; k < len && i0 + k < x.size(); ++k) {
    double env = 1.0;
    if (k < fade) env = static_cast<double>(k) / fade;
    if (len - k < fade) env = std::min(env, static_cast<double>(len - k) / fade);
    const double t = static_cast<double>(k) / kSynthRate;
    x[i0 + k] += amp * env * std::sin(2.0 * std::numbers::pi * freq * t + phase);
  }
}

void AddVoicedSegment(std::vector<double>& x, Rng& rng) {
  const double f0 = rng.Uniform(100.0, 300.0);
  const int harmonics = 2 + static_cast<int>(rng.Below(4));  // 2..5
  const double level = rng.Uniform(0.08, 0.35);
  const double am_phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double vib_rate = rng.Uniform(3.0, 6.0);
  std::vector<double> amps(harmonics), phases(harmonics);
  double amp_sum = 0.0;
  for (int h = 0; h < harmonics; ++h) {
    amps[h] = rng.Uniform(0.4, 1.0) / (h + 1);
    phases[h] = rng.Uniform(0.0, 2.0 * std::numbers::pi);
    amp_sum += amps[h];
  }
  const auto i0 = static_cast<size_t>(kActiveStartS * kSynthRate);
  const auto i1 = static_cast<size_t>(kActiveEndS * kSynthRate);
  const size_t fade = 160;
  double phase = 0.0;  // fundamental phase, integrated for the vibrato
  for (size_t i = i0; i < i1; ++i) {
    const double t = static_cast<double>(i) / kSynthRate;
    const double inst_f0 = f0 * (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * vib_rate * t));
    phase += 2.0 * std::numbers::pi * inst_f0 / kSynthRate;
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) v += amps[h] * std::sin((h + 1) * phase + phases[h]);
    double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 4.0 * t + am_phase);
    const size_t k = i - i0;
    if (k < fade) env *= static_cast<double>(k) / fade;
    if (i1 - i < fade) env *= static_cast<double>(i1 - i) / fade;
    x[i] += level * env * v / amp_sum;
  }
}

}  // namespace

std::vector<LabeledClip> SynthDataset(uint64_t seed, int n_clips,
                                    double speech_fraction) {
  if (n_clips <= 0) throw Error(ErrorKind::kOutOfRange, "n_clips must be > 0");
  if (!(speech_fraction >= 0.0 && speech_fraction <= 1.0)) {
    throw Error(ErrorKind::kOutOfRange, "speech_fraction must be in [0, 1]");
  }
  const auto n = static_cast<size_t>(n_clips);
  const auto n_pos = static_cast<size_t>(std::llround(n_clips * speech_fraction));

  // Fisher-Yates over the label vector so positives are spread out.
  std::vector<int> labels(n, 0);
  std::fill_n(labels.begin(), n_pos, 1);
  Rng order(DeriveSeed(seed, "synth-labels"));
  for (size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[order.Below(i)]);

  std::vector<LabeledClip> items(n);
  for (size_t c = 0; c < n; ++c) {
    Rng rng(DeriveSeed(seed, "synth-clip", c));
    LabeledClip& item = items[c];
    item.label = labels[c];
    item.clip.sample_rate = kSynthRate;
    item.clip.samples.assign(kSynthLen, 0.0);
    auto& x = item.clip.samples;
    AddNoiseFloor(x, rng, rng.Uniform(0.002, 0.01));
    if (item.label == 1) {
      AddVoicedSegment(x, rng);
      item.active_start = kActiveStartS;
      item.active_end = kActiveEndS;
    } else {
      const uint64_t kind = rng.Below(3);  // 0 noise, 1 bursts, 2 both
      if (kind != 1) {
        const auto colored = ColoredNoise(rng, kSynthLen, rng.Uniform(-0.9, 0.97),
                                          rng.Uniform(0.01, 0.12));
        for (size_t i = 0; i < kSynthLen; ++i) x[i] += colored[i];
      }
      if (kind != 0) {
        const int bursts = 1 + static_cast<int>(rng.Below(3));
        for (int b = 0; b < bursts; ++b) AddToneBurst(x, rng);
      }
    }
    for (double& v : x) v = std::clamp(v, -1.0, 1.0);
  }
  return items;
}

void ExportDataset(const std::vector<LabeledClip>& items,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string());
  std::ostringstream manifest;
  manifest << std::setprecision(6);
  for (size_t i = 0; i < items.size(); ++i) {
    std::ostringstream name;
    name << "clip_" << std::setw(4) << std::setfill('0') << i << ".wav";
    WriteWav(items[i].clip, dir / name.str());
    manifest << name.str() << '\t' << items[i].label << '\t'
             << items[i].active_start << '\t' << items[i].active_end << '\n';
  }
  std::ofstream f(dir / "manifest.tsv", std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  f << manifest.str();
}

std::vector<LabeledClip> ImportDataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.tsv";
  std::ifstream f(manifest_path);
  if (!f) throw Error(ErrorKind::kData, "missing manifest " + manifest_path.string());
  std::vector<LabeledClip> items;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string rel;
    LabeledClip item;
    if (!std::getline(row, rel, '\t') ||
        !(row >> item.label >> item.active_start >> item.active_end) ||
        (item.label != 0 && item.label != 1)) {
      throw Error(ErrorKind::kData, manifest_path.string() + ":" +
                                        std::to_string(line_no) + ": malformed row");
    }
    try {
      item.clip = ReadWav(dir / rel);
    } catch (const Error& e) {
      throw Error(ErrorKind::kData, e.what());
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw Error(ErrorKind::kData, "empty manifest " + manifest_path.string());
  return items;
}

}  // namespace sqdr

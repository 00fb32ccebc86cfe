#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sqdr {

// Mono waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// A fixed-length segment cut from a longer clip.
struct LabeledWindow {
  std::vector<double> samples;
  int label = 0;  // 1 = speech
  double source_offset = 0.0;  // seconds
};

struct SnrMixSpec {
  double snr_db = 0.0;
  uint64_t seed = 0;
};

// 16-bit PCM mono RIFF/WAVE only. Throws Error with kNotAWav,
// kUnsupportedEncoding or kTruncatedFile.
AudioClip ReadWav(const std::filesystem::path& path);

// Values outside [-1, 1] clamp to the PCM extremes; 1.0 maps to 32767.
void WriteWav(const AudioClip& clip, const std::filesystem::path& path);

double Rms(const std::vector<double>& x);
double Peak(const std::vector<double>& x);

// Noise gain used by MixAtSnr: rms(speech)/rms(noise) * 10^(-snr/20).
double SnrGain(double speech_rms, double noise_rms, double snr_db);

// Crops (or tiles, then crops) noise at a seeded offset so it matches the
// speech length, then returns speech + g * noise_crop.
AudioClip MixAtSnr(const AudioClip& speech, const AudioClip& noise,
                   const SnrMixSpec& spec);

// Positive shift moves content later; vacated samples are zero.
AudioClip ApplyTimeShift(const AudioClip& clip, double shift_ms);

// clip + a*u, u ~ U[-1, 1], a = peak(|clip|) * 10^(level_db/20).
AudioClip AddWhiteNoise(const AudioClip& clip, double level_db, uint64_t seed);

// Number of full windows: floor((n - w)/s) + 1, in integer samples.
size_t WindowCount(size_t n_samples, size_t window_samples,
                   size_t stride_samples);
size_t SecondsToSamples(double seconds, int sample_rate);

// Slices the clip into full windows; the trailing partial window is dropped.
// Labels are left at 0.
std::vector<LabeledWindow> WindowStream(const AudioClip& clip, double window_s,
                                        double stride_s);

struct LabeledClip {
  AudioClip clip;
  int label = 0;
  double active_start = 0.0;  // seconds; [0, 0] for non-speech
  double active_end = 0.0;
};

// Synthetic stand-in corpus: 1 s clips at 16 kHz. Speech clips carry an
// amplitude-modulated harmonic pulse train in [0.2, 0.83] s over a noise floor;
// non-speech clips carry colored noise and/or isolated tone bursts.
// Exactly round(n_clips * speech_fraction) clips are speech.
std::vector<LabeledClip> SynthDataset(uint64_t seed, int n_clips,
                                    double speech_fraction);

// Writes clip_NNNN.wav files plus manifest.tsv
// (relative-path, label, active-start-s, active-end-s).
void ExportDataset(const std::vector<LabeledClip>& items,
                   const std::filesystem::path& dir);

// Reads a directory written by ExportDataset (or any directory with a
// conforming manifest.tsv). Throws kData when the manifest is missing.
std::vector<LabeledClip> ImportDataset(const std::filesystem::path& dir);

inline constexpr double kActiveStartS = 0.2;
inline constexpr double kActiveEndS = 0.83;

}  // namespace sqdr

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqdr/eval_metrics.h"
#include "sqdr/parallel.h"
#include "sqdr/rng.h"
#include "sqdr/signal_io.h"
#include "sqdr/vad_model.h"

namespace sqdr {

// "synthetic:n=256,seed=7,speech_frac=0.5" or a directory holding manifest.tsv.
// Throws kData for a missing directory or manifest and kInvalidConfig for a
// malformed synthetic spec.
std::vector<LabeledClip> LoadDataset(const std::string& spec);

// Fixed-length training segment. Speech clips are cut from their active
// region (centered when the region is shorter than the window, uniformly
// placed inside it when longer); other clips at a uniform offset. Clips
// shorter than the window are zero-padded at the end.
struct Crop {
  AudioClip clip;
  int label = 0;
};
Crop TrainingCrop(const LabeledClip& item, double window_s, Rng& rng);

// A window is speech when its clip is labeled speech and at least half of the
// window overlaps the active region.
int WindowLabel(const LabeledClip& item, double offset_s, double window_s);

struct EvalOptions {
  double window_s = 0.63;
  double stride_s = 0.15;
  bool smooth = false;
  double threshold = 0.5;
  int threads = 1;
};

struct WindowScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Eval-mode window scores for every clip, concatenated in clip order.
// Smoothing runs over each clip's own window sequence.
WindowScores ScoreClips(const Model& model, const std::vector<LabeledClip>& items,
                        const EvalOptions& options);

// Single-class inputs give a NaN auroc rather than an error.
EvalReport Evaluate(const Model& model, const std::vector<LabeledClip>& items,
                    const EvalOptions& options);

// For each SNR, every clip is mixed with a noise clip picked by a seeded
// stream (noise offset also seeded) and scored; conditions hold one row per
// SNR in the given order plus "Avg." (arithmetic mean). The top-level fields
// repeat the Avg. row; counts are per condition.
EvalReport SnrSweep(const Model& model, const std::vector<LabeledClip>& items,
                    const std::vector<AudioClip>& noise, const std::vector<double>& snrs,
                    uint64_t seed, const EvalOptions& options);

// Non-speech synthetic clips used as a noise pool when no noise directory is
// given.
std::vector<AudioClip> SynthNoise(uint64_t seed, int n_clips);
// Every *.wav in a directory, sorted by file name.
std::vector<AudioClip> LoadNoiseDir(const std::string& dir);

// "10,5,0,-5,-10" -> {10, 5, 0, -5, -10}. Throws kInvalidConfig.
std::vector<double> ParseSnrList(const std::string& text);

}  // namespace sqdr


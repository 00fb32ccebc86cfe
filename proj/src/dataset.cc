#include "sqdr/dataset.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include "sqdr/error.h"

namespace sqdr {

namespace {

constexpr std::string_view kSyntheticPrefix = "synthetic:";

double ParseNumber(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::kInvalidConfig, "bad value '" + value + "' for " + key);
  }
  return v;
}

std::vector<LabeledClip> ParseSynthetic(const std::string& body) {
  std::map<std::string, std::string> kv;
  std::stringstream in(body);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidConfig, "synthetic spec field without '=': " + field);
    }
    kv[field.substr(0, eq)] = field.substr(eq + 1);
  }
  double n = -1.0, seed = 0.0, frac = 0.5;
  for (const auto& [key, value] : kv) {
    if (key == "n") {
      n = ParseNumber(key, value);
    } else if (key == "seed") {
      seed = ParseNumber(key, value);
    } else if (key == "speech_frac") {
      frac = ParseNumber(key, value);
    } else {
      throw Error(ErrorKind::kInvalidConfig, "unknown synthetic spec key " + key);
    }
  }
  if (n < 1 || n != std::floor(n)) {
    throw Error(ErrorKind::kInvalidConfig, "synthetic spec needs an integer n >= 1");
  }
  if (seed < 0 || seed != std::floor(seed)) {
    throw Error(ErrorKind::kInvalidConfig, "synthetic seed must be a non-negative integer");
  }
  if (frac < 0.0 || frac > 1.0) {
    throw Error(ErrorKind::kInvalidConfig, "speech_frac must lie in [0, 1]");
  }
  return SynthDataset(static_cast<uint64_t>(seed), static_cast<int>(n), frac);
}

}  // namespace

std::vector<LabeledClip> LoadDataset(const std::string& spec) {
  if (spec.rfind(kSyntheticPrefix, 0) == 0) {
    return ParseSynthetic(spec.substr(kSyntheticPrefix.size()));
  }
  const std::filesystem::path dir(spec);
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kData, "dataset directory not found: " + spec);
  }
  return ImportDataset(dir);
}

Crop TrainingCrop(const LabeledClip& item, double window_s, Rng& rng) {
  const int sr = item.clip.sample_rate;
  const auto n = static_cast<long>(item.clip.samples.size());
  const auto win = static_cast<long>(SecondsToSamples(window_s, sr));
  long start = 0;
  if (item.label == 1) {
    const auto a = static_cast<long>(std::lround(item.active_start * sr));
    const auto b = static_cast<long>(std::lround(item.active_end * sr));
    if (b - a > win) {
      start = a + static_cast<long>(rng.Below(static_cast<uint64_t>(b - a - win + 1)));
    } else {
      start = a - (win - (b - a)) / 2;
    }
    start = std::clamp(start, 0L, std::max(0L, n - win));
  } else if (n > win) {
    start = static_cast<long>(rng.Below(static_cast<uint64_t>(n - win + 1)));
  }
  Crop out;
  out.label = item.label;
  out.clip.sample_rate = sr;
  out.clip.samples.assign(static_cast<size_t>(win), 0.0);
  const long take = std::min(win, n - start);
  std::copy_n(item.clip.samples.begin() + start, take, out.clip.samples.begin());
  return out;
}

int WindowLabel(const LabeledClip& item, double offset_s, double window_s) {
  if (item.label != 1) return 0;
  const double overlap = std::min(offset_s + window_s, item.active_end) -
                         std::max(offset_s, item.active_start);
  return overlap >= 0.5 * window_s ? 1 : 0;
}

WindowScores ScoreClips(const Model& model, const std::vector<LabeledClip>& items,
                        const EvalOptions& options) {
  std::vector<WindowScores> per_clip(items.size());
  ParallelFor(items.size(), options.threads, [&](size_t i) {
    const auto windows =
        PredictWindows(model, items[i].clip, options.window_s, options.stride_s);
    WindowScores& ws = per_clip[i];
    for (const auto& [offset, score] : windows) {
      ws.scores.push_back(score);
      ws.labels.push_back(WindowLabel(items[i], offset, options.window_s));
    }
    if (options.smooth && !ws.scores.empty()) ws.scores = MedianSmooth(ws.scores);
  });
  WindowScores out;
  for (const auto& ws : per_clip) {
    out.scores.insert(out.scores.end(), ws.scores.begin(), ws.scores.end());
    out.labels.insert(out.labels.end(), ws.labels.begin(), ws.labels.end());
  }
  return out;
}

EvalReport Evaluate(const Model& model, const std::vector<LabeledClip>& items,
                    const EvalOptions& options) {
  if (items.empty()) throw Error(ErrorKind::kEmptyInput, "evaluation set is empty");
  const WindowScores ws = ScoreClips(model, items, options);
  if (ws.scores.empty()) {
    throw Error(ErrorKind::kClipTooShort, "no clip is as long as one window");
  }
  return MakeReport(ws.scores, ws.labels, options.threshold);
}

EvalReport SnrSweep(const Model& model, const std::vector<LabeledClip>& items,
                    const std::vector<AudioClip>& noise, const std::vector<double>& snrs,
                    uint64_t seed, const EvalOptions& options) {
  if (items.empty()) throw Error(ErrorKind::kEmptyInput, "evaluation set is empty");
  if (noise.empty()) throw Error(ErrorKind::kEmptyInput, "noise set is empty");
  if (snrs.empty()) throw Error(ErrorKind::kEmptyInput, "SNR list is empty");

  // The same noise clip and offset serve every SNR; only the gain changes.
  std::vector<size_t> pick(items.size());
  std::vector<uint64_t> mix_seed(items.size());
  Rng chooser(DeriveSeed(seed, "sweep-noise"));
  for (size_t i = 0; i < items.size(); ++i) {
    pick[i] = static_cast<size_t>(chooser.Below(noise.size()));
    mix_seed[i] = DeriveSeed(seed, "sweep-mix", i);
  }

  EvalReport report;
  report.threshold = options.threshold;
  double sum_auroc = 0.0, sum_f2 = 0.0;
  for (double snr : snrs) {
    std::vector<LabeledClip> mixed(items.size());
    ParallelFor(items.size(), options.threads, [&](size_t i) {
      mixed[i] = items[i];
      mixed[i].clip = MixAtSnr(items[i].clip, noise[pick[i]], {snr, mix_seed[i]});
    });
    const EvalReport r = Evaluate(model, mixed, options);
    std::ostringstream name;
    name << snr;
    report.conditions.push_back({name.str(), r.auroc, r.f2});
    report.n_pos = r.n_pos;
    report.n_neg = r.n_neg;
    sum_auroc += r.auroc;
    sum_f2 += r.f2;
  }
  const auto k = static_cast<double>(snrs.size());
  report.auroc = sum_auroc / k;
  report.f2 = sum_f2 / k;
  report.conditions.push_back({"Avg.", report.auroc, report.f2});
  return report;
}

std::vector<AudioClip> SynthNoise(uint64_t seed, int n_clips) {
  std::vector<AudioClip> out;
  for (auto& item : SynthDataset(DeriveSeed(seed, "noise-pool"), n_clips, 0.0)) {
    out.push_back(std::move(item.clip));
  }
  return out;
}

std::vector<AudioClip> LoadNoiseDir(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kData, "noise directory not found: " + dir);
  }
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error(ErrorKind::kData, "no .wav files in " + dir);
  std::vector<AudioClip> out;
  for (const auto& p : paths) out.push_back(ReadWav(p));
  return out;
}

std::vector<double> ParseSnrList(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) out.push_back(ParseNumber("snr list", field));
  if (out.empty()) throw Error(ErrorKind::kInvalidConfig, "empty SNR list");
  return out;
}

}  // namespace sqdr

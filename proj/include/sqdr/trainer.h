#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sqdr/dataset.h"
#include "sqdr/losses.h"
#include "sqdr/optim.h"
#include "sqdr/signal_io.h"
#include "sqdr/vad_model.h"

namespace sqdr {

struct TrainConfig {
  int epochs = 150;
  int batch_size = 32;
  double peak_lr = 0.01;
  double warmup_frac = 0.05;
  double hold_frac = 0.45;
  double decay_power = 2.0;
  double lambda = 0.25;
  double margin = 1.0;
  double shift_prob = 0.8;
  double shift_ms = 5.0;  // shifts are uniform in [-shift_ms, shift_ms]
  double noise_db_lo = -90.0;
  double noise_db_hi = -46.0;
  uint64_t seed = 0;
  double window_s = 0.63;
  double val_stride_s = 0.15;
  int threads = 1;
  // Off by default so logs are byte-identical across runs.
  bool record_wall_time = false;

  // Throws kInvalidConfig naming the violated constraint.
  void Validate() const;
  LrSchedule schedule() const;
  LossConfig loss() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double total = 0.0;
  double bce = 0.0;
  double qdr = 0.0;
  double val_auroc = 0.0;
  double val_f2 = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;
  // Batches whose QDR term was degenerate (one class only).
  int64_t degenerate_batches = 0;
  // Set when the training set holds a single class.
  bool single_class = false;

  // "epoch,lr,total,bce,qdr,val_auroc,val_f2,seconds" plus one row per epoch.
  std::string ToCsv() const;
};

struct BatchStats {
  int epoch = 0;  // 0-based
  int batch = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct TrainHooks {
  std::function<void(const BatchStats&)> on_batch;
  // Runs after gradients are accumulated and before the optimizer step.
  std::function<void(Model&)> after_backward;
};

struct TrainResult {
  Model best;
  Model final_model;
  TrainLog log;
  int best_epoch = 0;  // 1-based; 0 when no validation AUROC was available
};

// Augmentation applied to one training crop. The stream seed fixes every
// random choice.
struct Augmented {
  Crop clean;
  AudioClip shifted;  // clean.clip, shifted when applied
  AudioClip augmented;
  bool shift_applied = false;
  double shift_ms = 0.0;
  double noise_db = 0.0;
};
Augmented Augment(const LabeledClip& item, const TrainConfig& config, uint64_t stream_seed);

// Stream seed of the item at `position` in batch `batch` of epoch `epoch`.
uint64_t AugmentSeed(uint64_t seed, int epoch, int batch, int position);

// Clip order for one epoch: a seeded Fisher-Yates permutation.
std::vector<size_t> EpochOrder(uint64_t seed, int epoch, size_t n);

TrainResult Train(const std::vector<LabeledClip>& train_set,
                  const std::vector<LabeledClip>& val_set, const ModelConfig& model_config,
                  const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace sqdr

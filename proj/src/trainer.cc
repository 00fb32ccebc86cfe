#include "sqdr/trainer.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "sqdr/error.h"
#include "sqdr/parallel.h"

namespace sqdr {

namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kInvalidConfig, what);
}

bool AllFinite(std::span<ParamSlot* const> slots, bool grads) {
  for (const ParamSlot* s : slots) {
    if (!(grads ? s->grad : s->value).AllFinite()) return false;
  }
  return true;
}

std::string Where(int epoch, int batch) {
  return "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch);
}

}  // namespace

void TrainConfig::Validate() const {
  Require(epochs >= 1, "epochs must be >= 1");
  Require(batch_size >= 1, "batch_size must be >= 1");
  Require(std::isfinite(peak_lr) && peak_lr > 0.0, "peak_lr must be > 0");
  Require(warmup_frac >= 0.0 && hold_frac >= 0.0 && warmup_frac + hold_frac <= 1.0,
          "warmup_frac and hold_frac must be >= 0 and sum to <= 1");
  Require(decay_power > 0.0, "decay_power must be > 0");
  Require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  Require(margin > 0.0, "margin must be > 0");
  Require(shift_prob >= 0.0 && shift_prob <= 1.0, "shift_prob must lie in [0, 1]");
  Require(shift_ms >= 0.0, "shift_ms must be >= 0");
  Require(noise_db_lo <= noise_db_hi, "noise_db_lo must be <= noise_db_hi");
  Require(window_s > 0.0, "window_s must be > 0");
  Require(val_stride_s > 0.0, "val_stride_s must be > 0");
  Require(threads >= 1, "threads must be >= 1");
}

LrSchedule TrainConfig::schedule() const {
  return {peak_lr, epochs, warmup_frac, hold_frac, decay_power};
}

LossConfig TrainConfig::loss() const { return {margin, lambda}; }

std::string TrainLog::ToCsv() const {
  std::ostringstream s;
  s << "epoch,lr,total,bce,qdr,val_auroc,val_f2,seconds\n";
  s << std::setprecision(17);
  for (const auto& r : records) {
    s << r.epoch << ',' << r.lr << ',' << r.total << ',' << r.bce << ',' << r.qdr << ','
      << r.val_auroc << ',' << r.val_f2 << ',' << r.seconds << '\n';
  }
  return s.str();
}

uint64_t AugmentSeed(uint64_t seed, int epoch, int batch, int position) {
  const uint64_t e = DeriveSeed(seed, "augment", static_cast<uint64_t>(epoch));
  const uint64_t b = DeriveSeed(e, "batch", static_cast<uint64_t>(batch));
  return DeriveSeed(b, "item", static_cast<uint64_t>(position));
}

std::vector<size_t> EpochOrder(uint64_t seed, int epoch, size_t n) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(DeriveSeed(seed, "shuffle", static_cast<uint64_t>(epoch)));
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Below(i)]);
  return order;
}

Augmented Augment(const LabeledClip& item, const TrainConfig& config, uint64_t stream_seed) {
  Rng rng(stream_seed);
  Augmented out;
  out.clean = TrainingCrop(item, config.window_s, rng);
  out.shift_applied = rng.Uniform01() < config.shift_prob;
  const double shift = rng.Uniform(-config.shift_ms, config.shift_ms);
  out.noise_db = rng.Uniform(config.noise_db_lo, config.noise_db_hi);
  const uint64_t noise_seed = rng.NextU64();
  if (out.shift_applied) {
    out.shift_ms = shift;
    out.shifted = ApplyTimeShift(out.clean.clip, shift);
  } else {
    out.shifted = out.clean.clip;
  }
  out.augmented = AddWhiteNoise(out.shifted, out.noise_db, noise_seed);
  return out;
}

TrainResult Train(const std::vector<LabeledClip>& train_set,
                  const std::vector<LabeledClip>& val_set, const ModelConfig& model_config,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.Validate();
  model_config.Validate();
  if (train_set.empty()) throw Error(ErrorKind::kEmptyInput, "training set is empty");

  const FrontendConfig& fc = model_config.frontend;
  const LrSchedule schedule = config.schedule();
  const LossConfig loss_config = config.loss();

  TrainLog log;
  {
    size_t positives = 0;
    for (const auto& item : train_set) positives += item.label == 1 ? 1 : 0;
    log.single_class = positives == 0 || positives == train_set.size();
  }

  Model model = Model::Build(model_config, config.seed);
  std::unique_ptr<Model> best;
  int best_epoch = 0;
  double best_auroc = -std::numeric_limits<double>::infinity();
  const auto params = model.Params();
  EvalOptions val_options;
  val_options.window_s = config.window_s;
  val_options.stride_s = config.val_stride_s;
  val_options.threads = config.threads;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = LrAt(schedule, epoch + 0.5);
    const auto order = EpochOrder(config.seed, epoch, train_set.size());
    const size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
    double sum_total = 0.0, sum_bce = 0.0, sum_qdr = 0.0;

    for (size_t b = 0; b < n_batches; ++b) {
      const int batch = static_cast<int>(b);
      const size_t first = b * config.batch_size;
      const size_t count = std::min<size_t>(config.batch_size, order.size() - first);
      const SincParams sinc = model.frontend_params();

      std::vector<std::unique_ptr<SincExtraction>> extractions(count);
      std::vector<int> labels(count);
      ParallelFor(count, config.threads, [&](size_t k) {
        const Augmented aug = Augment(train_set[order[first + k]], config,
                                      AugmentSeed(config.seed, epoch, batch, static_cast<int>(k)));
        labels[k] = aug.clean.label;
        extractions[k] = std::make_unique<SincExtraction>(
            sinc, FrameSignal(aug.augmented, fc), fc);
      });

      std::vector<FeatureMap> features;
      features.reserve(count);
      for (const auto& x : extractions) features.push_back(x->features());
      const Tensor probs = model.ForwardNetwork(model.PackFeatures(features), Mode::kTrain);
      const std::vector<double> scores = probs.vec();
      const LossBreakdown loss = TotalLoss(scores, labels, loss_config);
      if (!std::isfinite(loss.total)) {
        throw Error(ErrorKind::kNumericAbort, "non-finite loss at " + Where(epoch, batch));
      }
      if (loss.qdr_degenerate) ++log.degenerate_batches;
      if (hooks.on_batch) hooks.on_batch({epoch, batch, lr, loss});

      const std::vector<double> dscore = LossBackward(scores, labels, loss_config);
      const Tensor dinput = model.BackwardNetwork(Tensor({count, 1}, dscore));

      std::vector<SincGrad> grads(count);
      ParallelFor(count, config.threads, [&](size_t k) {
        const FeatureMap& f = features[k];
        std::vector<double> upstream(static_cast<size_t>(f.n_filters) * f.n_frames);
        for (int i = 0; i < f.n_filters; ++i) {
          for (int t = 0; t < f.n_frames; ++t) {
            upstream[static_cast<size_t>(i) * f.n_frames + t] = dinput.at(k, 0, i, t);
          }
        }
        grads[k] = extractions[k]->Backward(upstream);
      });
      for (const auto& g : grads) model.AddFrontendGrad(g);

      if (hooks.after_backward) hooks.after_backward(model);
      if (!AllFinite(params, true)) {
        throw Error(ErrorKind::kNumericAbort, "non-finite gradient at " + Where(epoch, batch));
      }
      SgdStep(params, lr);
      if (!AllFinite(params, false)) {
        throw Error(ErrorKind::kNumericAbort, "non-finite weight at " + Where(epoch, batch));
      }
      sum_total += loss.total;
      sum_bce += loss.bce;
      sum_qdr += loss.qdr;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    const auto nb = static_cast<double>(n_batches);
    rec.total = sum_total / nb;
    rec.bce = sum_bce / nb;
    rec.qdr = sum_qdr / nb;
    rec.val_auroc = std::numeric_limits<double>::quiet_NaN();
    rec.val_f2 = std::numeric_limits<double>::quiet_NaN();
    if (!val_set.empty()) {
      const EvalReport r = Evaluate(model, val_set, val_options);
      rec.val_auroc = r.auroc;
      rec.val_f2 = r.f2;
      if (r.auroc > best_auroc) {
        best_auroc = r.auroc;
        best_epoch = epoch + 1;
        best = std::make_unique<Model>(model);
      }
    }
    if (config.record_wall_time) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                        .count();
    }
    log.records.push_back(rec);
  }

  TrainResult result{best ? *best : model, model, std::move(log), best_epoch};
  return result;
}

}  // namespace sqdr

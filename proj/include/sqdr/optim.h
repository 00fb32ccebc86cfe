#pragma once

#include <span>

#include "sqdr/tensor.h"

namespace sqdr {

inline constexpr double kSgdMomentum = 0.9;
inline constexpr double kWeightDecay = 0.001;

// v <- momentum * v + (grad + decay * value); value <- value - lr * v;
// grad <- 0. Slots with learnable == false are skipped.
void SgdStep(std::span<ParamSlot* const> params, double lr,
             double momentum = kSgdMomentum, double weight_decay = kWeightDecay);

// Linear warm-up over the first warmup_frac of the epochs, constant through
// warmup_frac + hold_frac, then peak * (1 - progress)^decay_power where
// progress runs from 0 to 1 over the remaining epochs.
struct LrSchedule {
  double peak_lr = 0.01;
  int total_epochs = 150;
  double warmup_frac = 0.05;
  double hold_frac = 0.45;
  double decay_power = 2.0;
};

// Throws kOutOfRange outside [0, total_epochs].
double LrAt(const LrSchedule& schedule, double epoch);

}  // namespace sqdr

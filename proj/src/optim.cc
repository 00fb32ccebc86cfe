#include "sqdr/optim.h"

#include <cmath>
#include <string>

#include "sqdr/error.h"

namespace sqdr {

void SgdStep(std::span<ParamSlot* const> params, double lr, double momentum,
             double weight_decay) {
  for (ParamSlot* slot : params) {
    if (!slot->learnable) continue;
    auto value = slot->value.data();
    auto grad = slot->grad.data();
    auto buf = slot->momentum.data();
    for (size_t i = 0; i < value.size(); ++i) {
      buf[i] = momentum * buf[i] + (grad[i] + weight_decay * value[i]);
      value[i] -= lr * buf[i];
      grad[i] = 0.0;
    }
  }
}

double LrAt(const LrSchedule& schedule, double epoch) {
  const auto total = static_cast<double>(schedule.total_epochs);
  if (!(epoch >= 0.0 && epoch <= total)) {
    throw Error(ErrorKind::kOutOfRange,
                "epoch " + std::to_string(epoch) + " outside [0, " +
                    std::to_string(schedule.total_epochs) + "]");
  }
  const double warmup_end = schedule.warmup_frac * total;
  const double hold_end = (schedule.warmup_frac + schedule.hold_frac) * total;
  if (epoch <= warmup_end) {
    return warmup_end > 0.0 ? schedule.peak_lr * epoch / warmup_end : schedule.peak_lr;
  }
  if (epoch <= hold_end) return schedule.peak_lr;
  const double span = total - hold_end;
  const double progress = (epoch - hold_end) / span;
  return schedule.peak_lr * std::pow(1.0 - progress, schedule.decay_power);
}

}  // namespace sqdr

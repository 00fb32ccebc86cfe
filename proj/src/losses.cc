#include "sqdr/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "sqdr/error.h"

namespace sqdr {

namespace {

void CheckBatch(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, std::to_string(scores.size()) + " scores vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw Error(ErrorKind::kEmptyInput, "empty score batch");
}

double Clamped(double s) { return std::clamp(s, kBceClamp, 1.0 - kBceClamp); }

}  // namespace

double Bce(std::span<const double> scores, std::span<const int> labels) {
  CheckBatch(scores, labels);
  double acc = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw Error(ErrorKind::kScoreOutOfRange,
                  "score " + std::to_string(scores[i]) + " at index " + std::to_string(i));
    }
    const double s = Clamped(scores[i]);
    acc += labels[i] ? std::log(s) : std::log(1.0 - s);
  }
  return -acc / static_cast<double>(scores.size());
}

QdrResult Qdr(std::span<const double> scores, std::span<const int> labels, double margin) {
  CheckBatch(scores, labels);
  size_t n_pos = 0;
  for (int y : labels) n_pos += y ? 1 : 0;
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return {0.0, true};
  double acc = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      const double slack = margin - (scores[i] - scores[j]);
      if (slack > 0.0) acc += slack * slack;
    }
  }
  return {acc / (static_cast<double>(n_pos) * static_cast<double>(n_neg)), false};
}

LossBreakdown TotalLoss(std::span<const double> scores, std::span<const int> labels,
                        const LossConfig& config) {
  LossBreakdown out;
  out.bce = Bce(scores, labels);
  const QdrResult q = Qdr(scores, labels, config.margin);
  out.qdr = q.value;
  out.qdr_degenerate = q.degenerate;
  out.total = config.lambda * out.qdr + (1.0 - config.lambda) * out.bce;
  return out;
}

std::vector<double> LossBackward(std::span<const double> scores,
                                 std::span<const int> labels, const LossConfig& config) {
  CheckBatch(scores, labels);
  const size_t n = scores.size();
  std::vector<double> grad(n, 0.0);
  const double bce_w = (1.0 - config.lambda) / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double s = scores[i];
    if (s <= kBceClamp || s >= 1.0 - kBceClamp) continue;  // clamp is flat
    grad[i] = labels[i] ? -bce_w / s : bce_w / (1.0 - s);
  }

  size_t n_pos = 0;
  for (int y : labels) n_pos += y ? 1 : 0;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0 || config.lambda == 0.0) return grad;
  const double scale =
      config.lambda * 2.0 / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  for (size_t i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < n; ++j) {
      if (labels[j]) continue;
      const double slack = config.margin - (scores[i] - scores[j]);
      if (slack > 0.0) {
        grad[i] -= scale * slack;
        grad[j] += scale * slack;
      }
    }
  }
  return grad;
}

}  // namespace sqdr

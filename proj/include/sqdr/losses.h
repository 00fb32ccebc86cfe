#pragma once

#include <span>
#include <vector>

namespace sqdr {

struct LossConfig {
  double margin = 1.0;
  double lambda = 0.25;
};

inline constexpr double kBceClamp = 1e-12;

// Binary cross-entropy, natural log, mean over the batch. Scores are clamped
// to [1e-12, 1 - 1e-12]; scores outside [0, 1] throw kScoreOutOfRange.
double Bce(std::span<const double> scores, std::span<const int> labels);

struct QdrResult {
  double value = 0.0;
  // True when the batch lacks positives or negatives; value is then 0.
  bool degenerate = false;
};

// Quadratic disparity ranking loss:
//   1/(|P||N|) sum_{i in P} sum_{j in N} max(0, m - (s_i - s_j))^2
// Pairs are summed positives-outer, negatives-inner, both ascending.
QdrResult Qdr(std::span<const double> scores, std::span<const int> labels, double margin);

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double qdr = 0.0;
  bool qdr_degenerate = false;
};

// lambda * qdr + (1 - lambda) * bce.
LossBreakdown TotalLoss(std::span<const double> scores, std::span<const int> labels,
                        const LossConfig& config);

// d(total)/d(score) per sample.
std::vector<double> LossBackward(std::span<const double> scores,
                                 std::span<const int> labels, const LossConfig& config);

}  // namespace sqdr

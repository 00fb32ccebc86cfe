#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sqdr {

// Mann-Whitney AUROC from average ranks; tied pos/neg pairs count one half.
// Throws kSingleClass unless both classes are present.
double Auroc(std::span<const double> scores, std::span<const int> labels);

struct FBetaResult {
  double value = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  // Set when precision + recall == 0 (value is then 0).
  bool degenerate = false;
};

// Predictions are score >= threshold.
FBetaResult FBeta(std::span<const double> scores, std::span<const int> labels,
                  double threshold, double beta);

inline constexpr int kMedianWindow = 8;

// Centered sliding median, hop 1, window kMedianWindow. Near the edges the
// window shrinks symmetrically; even-sized windows average the two middle
// values. Output length equals input length.
std::vector<double> MedianSmooth(std::span<const double> scores,
                                 int window = kMedianWindow);

struct ConditionMetrics {
  std::string name;
  double auroc = 0.0;
  double f2 = 0.0;
};

struct EvalReport {
  double auroc = 0.0;
  double f2 = 0.0;
  double threshold = 0.5;
  int64_t n_pos = 0;
  int64_t n_neg = 0;
  std::vector<ConditionMetrics> conditions;
};

// Fills auroc, f2 (beta 2) and the counts from window-level scores.
EvalReport MakeReport(std::span<const double> scores, std::span<const int> labels,
                      double threshold = 0.5);

// JSON object with keys auroc, f2, threshold, n_pos, n_neg, conditions.
std::string ReportToJson(const EvalReport& report);
// "condition,auroc,f2" header plus one row per condition.
std::string ReportToCsv(const EvalReport& report);

}  // namespace sqdr

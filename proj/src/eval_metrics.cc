#include "sqdr/eval_metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "sqdr/error.h"

namespace sqdr {

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "scores and labels differ in length");
  }
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Twice the average rank keeps tie ranks integral: ranks (k+1)..j share
  // (k+1+j)/2.
  double pos_rank_sum_x2 = 0.0;
  size_t n_pos = 0;
  size_t k = 0;
  while (k < n) {
    size_t j = k + 1;
    while (j < n && scores[order[j]] == scores[order[k]]) ++j;
    const auto shared_x2 = static_cast<double>(k + 1 + j);
    for (size_t q = k; q < j; ++q) {
      if (labels[order[q]]) {
        pos_rank_sum_x2 += shared_x2;
        ++n_pos;
      }
    }
    k = j;
  }
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorKind::kSingleClass, "AUROC needs both positives and negatives");
  }
  const auto p = static_cast<double>(n_pos);
  const double u = pos_rank_sum_x2 / 2.0 - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

FBetaResult FBeta(std::span<const double> scores, std::span<const int> labels,
                  double threshold, double beta) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "scores and labels differ in length");
  }
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++tp;
    if (pred && !labels[i]) ++fp;
    if (!pred && labels[i]) ++fn;
  }
  FBetaResult r;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (r.precision + r.recall == 0.0) {
    r.degenerate = true;
    return r;
  }
  const double b2 = beta * beta;
  r.value = (1.0 + b2) * r.precision * r.recall / (b2 * r.precision + r.recall);
  return r;
}

std::vector<double> MedianSmooth(std::span<const double> scores, int window) {
  const auto n = static_cast<long>(scores.size());
  if (n == 0) throw Error(ErrorKind::kEmptyInput, "median_smooth on empty sequence");
  if (window < 1) throw Error(ErrorKind::kOutOfRange, "median window must be >= 1");
  // Full window [i - left, i + right]; an even window leans one step right.
  // Where it does not fit, fall back to the widest symmetric window
  // [i - k, i + k] that does.
  const long left = (window - 1) / 2;
  const long right = window / 2;
  std::vector<double> out(scores.size());
  std::vector<double> buf;
  for (long i = 0; i < n; ++i) {
    long l = left, r = right;
    if (i - left < 0 || i + right > n - 1) {
      l = r = std::min({left, i, n - 1 - i});
    }
    buf.assign(scores.begin() + (i - l), scores.begin() + (i + r + 1));
    std::sort(buf.begin(), buf.end());
    const size_t m = buf.size();
    out[static_cast<size_t>(i)] = m % 2 ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
  }
  return out;
}

EvalReport MakeReport(std::span<const double> scores, std::span<const int> labels,
                      double threshold) {
  EvalReport r;
  r.threshold = threshold;
  for (int y : labels) (y ? r.n_pos : r.n_neg) += 1;
  r.auroc = (r.n_pos && r.n_neg) ? Auroc(scores, labels)
                                 : std::numeric_limits<double>::quiet_NaN();
  r.f2 = FBeta(scores, labels, threshold, 2.0).value;
  return r;
}

namespace {

nlohmann::json Number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["auroc"] = Number(report.auroc);
  j["f2"] = Number(report.f2);
  j["threshold"] = report.threshold;
  j["n_pos"] = report.n_pos;
  j["n_neg"] = report.n_neg;
  j["conditions"] = nlohmann::ordered_json::object();
  for (const auto& c : report.conditions) {
    j["conditions"][c.name] = {{"auroc", Number(c.auroc)}, {"f2", Number(c.f2)}};
  }
  return j.dump(2);
}

std::string ReportToCsv(const EvalReport& report) {
  std::ostringstream s;
  s << "condition,auroc,f2\n" << std::fixed << std::setprecision(6);
  for (const auto& c : report.conditions) s << c.name << ',' << c.auroc << ',' << c.f2 << '\n';
  return s.str();
}

}  // namespace sqdr

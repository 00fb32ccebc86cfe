#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sqdr/rng.h"
#include "sqdr/tensor.h"

namespace sqdr::test {

inline std::vector<double> RandomVector(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(lo, hi);
  return v;
}

inline Tensor RandomTensor(Rng& rng, std::vector<size_t> shape, double lo = -1.0,
                           double hi = 1.0) {
  const size_t n = ShapeSize(shape);
  return Tensor(std::move(shape), RandomVector(rng, n, lo, hi));
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// |a - n| / max(|a|, |n|, floor).
inline double RelError(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

struct GradReport {
  double max_rel = 0.0;
  size_t worst = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  size_t checked = 0;
};

// Central differences of `loss` with respect to every entry of `x` (or the
// entries listed in `indices`), compared with `analytic`.
inline GradReport CheckGradient(std::span<double> x, std::span<const double> analytic,
                                const std::function<double()>& loss, double step = 1e-5,
                                std::vector<size_t> indices = {}) {
  if (indices.empty()) {
    indices.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) indices[i] = i;
  }
  GradReport r;
  for (size_t i : indices) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = loss();
    x[i] = keep - step;
    const double down = loss();
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double e = RelError(analytic[i], numeric);
    if (r.checked == 0 || e > r.max_rel) {
      r.max_rel = e;
      r.worst = i;
      r.analytic = analytic[i];
      r.numeric = numeric;
    }
    ++r.checked;
  }
  return r;
}

inline GradReport Merge(GradReport a, const GradReport& b) {
  if (b.max_rel > a.max_rel) {
    const size_t checked = a.checked + b.checked;
    a = b;
    a.checked = checked;
  } else {
    a.checked += b.checked;
  }
  return a;
}

// O(n^2) pair counter: correctly ordered pairs + 0.5 * ties.
inline double BruteAuroc(std::span<const double> s, std::span<const int> y) {
  double good = 0.0, pairs = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) good += 1.0;
      else if (s[i] == s[j]) good += 0.5;
    }
  }
  return good / pairs;
}

inline double BruteQdr(std::span<const double> s, std::span<const int> y, double m) {
  double sum = 0.0;
  size_t np = 0, nn = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1) ++np; else ++nn;
  }
  if (np == 0 || nn == 0) return 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      const double h = std::max(0.0, m - (s[i] - s[j]));
      sum += h * h;
    }
  }
  return sum / (static_cast<double>(np) * static_cast<double>(nn));
}

// Per-position sort of the centered window, shrunk symmetrically at edges.
inline std::vector<double> BruteMedian(std::span<const double> x, int window) {
  const long n = static_cast<long>(x.size());
  const long left = (window - 1) / 2, right = window / 2;
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    long l = left, r = right;
    if (i - left < 0 || i + right > n - 1) l = r = std::min({left, i, n - 1 - i});
    std::vector<double> w(x.begin() + (i - l), x.begin() + (i + r + 1));
    std::sort(w.begin(), w.end());
    const size_t k = w.size();
    out[i] = k % 2 == 1 ? w[k / 2] : 0.5 * (w[k / 2 - 1] + w[k / 2]);
  }
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sqdr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sqdr::test

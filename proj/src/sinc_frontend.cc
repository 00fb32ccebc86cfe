#include "sqdr/sinc_frontend.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sqdr/error.h"

namespace sqdr {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPi = std::numbers::pi;

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Folded Gram matrix of one frame, written as an (R+1) x (R+1) block into
// out with the given row stride.
//
// With y[m] = sum_k s[k] x[m+k] and s[R+j] = s[R-j] = u[j], the filtered
// energy is u^T Gf u where Gf folds the full Gram G[k][l] = sum_m x[m+k] x[m+l]
// over the index pairs {R+j, R-j}. G is filled along its diagonals with the
// sliding recurrence G[k+1][l+1] = G[k][l] + x[M+k] x[M+l] - x[k] x[l].
void FoldedGram(std::span<const double> x, int length, int valid,
                std::vector<double>& full, double* out, size_t stride) {
  const int L = length;
  const int M = valid;
  const int R = (L - 1) / 2;
  full.resize(static_cast<size_t>(L) * L);
  for (int d = 0; d < L; ++d) {
    double g = 0.0;
    for (int m = 0; m < M; ++m) g += x[m] * x[m + d];
    full[d] = g;
    for (int k = 0; k + d + 1 < L; ++k) {
      g += x[M + k] * x[M + k + d] - x[k] * x[k + d];
      full[static_cast<size_t>(k + 1) * L + (k + 1 + d)] = g;
    }
  }
  auto G = [&](int a, int b) {
    return a <= b ? full[static_cast<size_t>(a) * L + b]
                  : full[static_cast<size_t>(b) * L + a];
  };
  for (int j = 0; j <= R; ++j) {
    for (int q = j; q <= R; ++q) {
      double v;
      if (j == 0 && q == 0) {
        v = G(R, R);
      } else if (j == 0) {
        v = G(R, R + q) + G(R, R - q);
      } else {
        v = G(R + j, R + q) + G(R + j, R - q) + G(R - j, R + q) +
            G(R - j, R - q);
      }
      out[static_cast<size_t>(j) * stride + q] = v;
      out[static_cast<size_t>(q) * stride + j] = v;
    }
  }
}

}  // namespace

void FrontendConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::kInvalidConfig, msg);
  };
  if (n_filters < 1) fail("n_filters must be >= 1");
  if (half_len < 0) fail("half_len must be >= 0");
  if (filter_len() > frame_len) fail("filter length 2R+1 exceeds frame_len");
  if (hop_len < 1) fail("hop_len must be >= 1");
  if (sample_rate <= 0) fail("sample_rate must be > 0");
  if (!(log_floor > 0.0)) fail("log_floor must be > 0");
  if (HzToRad(kMinLowCutoffHz + kMinBandwidthHz, sample_rate) >= kPi - kNyquistGuard) {
    fail("sample_rate too low for the cutoff guards");
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
double HzToRad(double hz, int sample_rate) { return 2.0 * kPi * hz / sample_rate; }
double RadToHz(double rad, int sample_rate) { return rad * sample_rate / (2.0 * kPi); }

Cutoffs ComputeCutoffs(double theta1, double theta2, int sample_rate) {
  const double w_min = HzToRad(kMinLowCutoffHz, sample_rate);
  const double gap = HzToRad(kMinBandwidthHz, sample_rate);
  const double top = kPi - kNyquistGuard;
  Cutoffs c;
  const double low = w_min + std::abs(theta1);
  if (low < top - gap) {
    c.low = low;
    c.dlow_dtheta1 = Sign(theta1);
  } else {
    c.low = top - gap;
  }
  const double high = c.low + gap + std::abs(theta2);
  if (high < top) {
    c.high = high;
    c.dhigh_dtheta1 = c.dlow_dtheta1;
    c.dhigh_dtheta2 = Sign(theta2);
  } else {
    c.high = top;
  }
  return c;
}

std::vector<double> MelEdgesHz(const FrontendConfig& config) {
  const double lo = HzToMel(kMinLowCutoffHz);
  const double hi = HzToMel(config.sample_rate / 2.0 - kMinBandwidthHz);
  std::vector<double> edges(static_cast<size_t>(config.n_filters) + 1);
  for (size_t k = 0; k < edges.size(); ++k) {
    edges[k] = MelToHz(lo + (hi - lo) * static_cast<double>(k) / config.n_filters);
  }
  edges.front() = kMinLowCutoffHz;
  return edges;
}

SincParams InitMel(const FrontendConfig& config) {
  config.Validate();
  const auto edges = MelEdgesHz(config);
  const double w_min = HzToRad(kMinLowCutoffHz, config.sample_rate);
  const double gap = HzToRad(kMinBandwidthHz, config.sample_rate);
  SincParams p;
  const auto F = static_cast<size_t>(config.n_filters);
  p.theta1.resize(F);
  p.theta2.resize(F);
  p.gain.assign(F, 1.0);
  for (size_t i = 0; i < F; ++i) {
    const double low = HzToRad(edges[i], config.sample_rate);
    const double high = HzToRad(edges[i + 1], config.sample_rate);
    p.theta1[i] = low - w_min;
    p.theta2[i] = std::max(0.0, high - low - gap);
  }
  return p;
}

double Prototype(double low, double high, long n) {
  if (n == 0) return (high - low) / kPi;
  const auto k = static_cast<double>(n);
  // (w/pi) sin(w n)/(w n) = sin(w n)/(pi n)
  return (std::sin(high * k) - std::sin(low * k)) / (kPi * k);
}

double HammingTap(int n, int length) {
  if (length == 1) return 1.0;
  return 0.54 - 0.46 * std::cos(2.0 * kPi * n / (length - 1));
}

FilterBank Materialize(const SincParams& params, const FrontendConfig& config) {
  const int L = config.filter_len();
  const int R = config.half_len;
  FilterBank bank;
  bank.n_filters = static_cast<int>(params.size());
  bank.length = L;
  bank.taps.resize(params.size() * static_cast<size_t>(L));
  for (int i = 0; i < bank.n_filters; ++i) {
    const Cutoffs c = ComputeCutoffs(params.theta1[i], params.theta2[i], config.sample_rate);
    double* row = bank.taps.data() + static_cast<size_t>(i) * L;
    for (int j = 0; j <= R; ++j) {
      row[R + j] = params.gain[i] * Prototype(c.low, c.high, j) * HammingTap(R + j, L);
      row[R - j] = row[R + j];
    }
  }
  return bank;
}

std::vector<double> MagnitudeResponseDb(std::span<const double> taps, int n_fft) {
  // Linear phase: H(w) = e^{-jwR} (s[R] + 2 sum_j s[R+j] cos(w j)).
  const int L = static_cast<int>(taps.size());
  const int R = (L - 1) / 2;
  std::vector<double> out(static_cast<size_t>(n_fft) / 2 + 1);
  for (size_t b = 0; b < out.size(); ++b) {
    const double w = 2.0 * kPi * static_cast<double>(b) / n_fft;
    double a = taps[R];
    for (int j = 1; j <= R; ++j) a += 2.0 * taps[R + j] * std::cos(w * j);
    out[b] = 20.0 * std::log10(std::max(std::abs(a), 1e-300));
  }
  return out;
}

size_t FrameCount(size_t n_samples, const FrontendConfig& config) {
  const auto frame = static_cast<size_t>(config.frame_len);
  if (n_samples < frame) return 0;
  return (n_samples - frame) / static_cast<size_t>(config.hop_len) + 1;
}

Frames FrameRange(std::span<const double> samples, size_t first, size_t count,
                  const FrontendConfig& config) {
  const auto frame = static_cast<size_t>(config.frame_len);
  const auto hop = static_cast<size_t>(config.hop_len);
  if (count == 0 || (first + count - 1) * hop + frame > samples.size()) {
    throw Error(ErrorKind::kClipTooShort,
                std::to_string(samples.size()) + " samples cannot hold frames [" +
                    std::to_string(first) + ", " + std::to_string(first + count) + ")");
  }
  Frames out;
  out.count = count;
  out.frame_len = frame;
  out.data.resize(count * frame);
  for (size_t t = 0; t < count; ++t) {
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>((first + t) * hop), frame,
                out.data.begin() + static_cast<std::ptrdiff_t>(t * frame));
  }
  return out;
}

Frames FrameSignal(const AudioClip& clip, const FrontendConfig& config) {
  const size_t count = FrameCount(clip.samples.size(), config);
  if (count == 0) {
    throw Error(ErrorKind::kClipTooShort,
                std::to_string(clip.samples.size()) + " samples < frame_len " +
                    std::to_string(config.frame_len));
  }
  return FrameRange(clip.samples, 0, count, config);
}

FeatureMap FeatureMap::Columns(int first, int count) const {
  FeatureMap out;
  out.n_filters = n_filters;
  out.n_frames = count;
  out.values.resize(static_cast<size_t>(n_filters) * count);
  for (int i = 0; i < n_filters; ++i) {
    for (int t = 0; t < count; ++t) out.at(i, t) = at(i, first + t);
  }
  if (!frame_times.empty()) {
    out.frame_times.assign(frame_times.begin() + first,
                           frame_times.begin() + first + count);
  }
  return out;
}

SincExtraction::SincExtraction(const SincParams& params, const Frames& frames,
                               const FrontendConfig& config)
    : params_(params), config_(config), n_frames_(static_cast<int>(frames.count)) {
  if (frames.frame_len != static_cast<size_t>(config.frame_len)) {
    throw Error(ErrorKind::kShapeMismatch, "frame length differs from config");
  }
  const int F = static_cast<int>(params.size());
  const int R = config.half_len;
  const int W = R + 1;
  const int T = n_frames_;
  const auto block = static_cast<size_t>(W);

  folded_taps_.resize(static_cast<size_t>(F) * W);
  for (int i = 0; i < F; ++i) {
    const Cutoffs c = ComputeCutoffs(params.theta1[i], params.theta2[i], config.sample_rate);
    for (int j = 0; j < W; ++j) {
      folded_taps_[static_cast<size_t>(i) * W + j] =
          params.gain[i] * Prototype(c.low, c.high, j) *
          HammingTap(R + j, config.filter_len());
    }
  }

  // One GEMM per frame keeps each frame's arithmetic independent of where
  // the frame sits in the batch, so features of a frame are bitwise stable.
  gram_times_taps_.resize(static_cast<size_t>(F) * T * W);
  std::vector<double> gram(block * block);
  std::vector<double> scratch;
  Eigen::Map<const RowMatrix> taps(folded_taps_.data(), F, W);
  Eigen::Map<const RowMatrix> g(gram.data(), W, W);
  using Strided = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
  for (int t = 0; t < T; ++t) {
    FoldedGram(frames.frame(t), config.filter_len(), config.valid_len(), scratch,
               gram.data(), block);
    Strided z(gram_times_taps_.data() + static_cast<size_t>(t) * W, F, W,
              Eigen::OuterStride<>(static_cast<Eigen::Index>(T) * W));
    z.noalias() = taps * g;
  }

  energies_.resize(static_cast<size_t>(F) * T);
  features_.n_filters = F;
  features_.n_frames = T;
  features_.values.resize(energies_.size());
  features_.frame_times.resize(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    features_.frame_times[t] = static_cast<double>(t) * config.hop_len / config.sample_rate;
  }
  for (int i = 0; i < F; ++i) {
    const double* u = folded_taps_.data() + static_cast<size_t>(i) * W;
    for (int t = 0; t < T; ++t) {
      const double* zt = gram_times_taps_.data() + (static_cast<size_t>(i) * T + t) * W;
      double e = 0.0;
      for (int j = 0; j < W; ++j) e += zt[j] * u[j];
      e = std::max(e, 0.0);
      energies_[static_cast<size_t>(i) * T + t] = e;
      features_.at(i, t) = std::log(config.log_floor + e);
    }
  }
}

SincGrad SincExtraction::Backward(std::span<const double> upstream) const {
  const int F = static_cast<int>(params_.size());
  const int R = config_.half_len;
  const int W = R + 1;
  const int T = n_frames_;
  if (upstream.size() != static_cast<size_t>(F) * T) {
    throw Error(ErrorKind::kShapeMismatch, "upstream gradient must be F x T");
  }
  SincGrad grad;
  grad.theta1.assign(F, 0.0);
  grad.theta2.assign(F, 0.0);
  grad.gain.assign(F, 0.0);

  std::vector<double> du(W);
  for (int i = 0; i < F; ++i) {
    // dL/du = sum_t w_t * 2 G_t u, accumulated in ascending frame order.
    std::fill(du.begin(), du.end(), 0.0);
    for (int t = 0; t < T; ++t) {
      const size_t it = static_cast<size_t>(i) * T + t;
      const double w = 2.0 * upstream[it] / (config_.log_floor + energies_[it]);
      if (w == 0.0) continue;
      const double* zt = gram_times_taps_.data() + it * W;
      for (int j = 0; j < W; ++j) du[j] += w * zt[j];
    }
    const Cutoffs c = ComputeCutoffs(params_.theta1[i], params_.theta2[i], config_.sample_rate);
    const double b = params_.gain[i];
    double d_low = 0.0, d_high = 0.0, d_gain = 0.0;
    for (int j = 0; j < W; ++j) {
      const double h = HammingTap(R + j, config_.filter_len());
      d_gain += du[j] * Prototype(c.low, c.high, j) * h;
      d_high += du[j] * b * h * std::cos(c.high * j) / kPi;
      d_low -= du[j] * b * h * std::cos(c.low * j) / kPi;
    }
    grad.gain[i] = d_gain;
    grad.theta1[i] = d_low * c.dlow_dtheta1 + d_high * c.dhigh_dtheta1;
    grad.theta2[i] = d_high * c.dhigh_dtheta2;
  }
  return grad;
}

FeatureMap Extract(const SincParams& params, const Frames& frames,
                   const FrontendConfig& config) {
  return SincExtraction(params, frames, config).features();
}

SincGrad ExtractBackward(const SincParams& params, const Frames& frames,
                         const FrontendConfig& config,
                         std::span<const double> upstream) {
  return SincExtraction(params, frames, config).Backward(upstream);
}

}  // namespace sqdr

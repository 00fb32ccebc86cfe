#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sqdr/signal_io.h"

namespace sqdr {

struct FrontendConfig {
  int n_filters = 64;
  int half_len = 125;  // R; filter length is 2R+1
  int frame_len = 400;
  int hop_len = 160;
  int sample_rate = 16000;
  double log_floor = 1e-8;

  int filter_len() const { return 2 * half_len + 1; }
  // Output samples per frame of the valid-mode convolution.
  int valid_len() const { return frame_len - filter_len() + 1; }
  // Throws kInvalidConfig naming the violated constraint.
  void Validate() const;
};

// Learnable front-end state. theta1/theta2 are unconstrained; the cutoffs are
// derived through ComputeCutoffs so 0 < low < high <= pi - guard always holds.
struct SincParams {
  std::vector<double> theta1;
  std::vector<double> theta2;
  std::vector<double> gain;

  size_t size() const { return gain.size(); }
};

// Reparameterization constants, in Hz except the guard (rad/sample).
inline constexpr double kMinLowCutoffHz = 30.0;
inline constexpr double kMinBandwidthHz = 50.0;
inline constexpr double kNyquistGuard = 1e-3;

struct Cutoffs {
  double low = 0.0;   // rad/sample
  double high = 0.0;  // rad/sample
  // Partial derivatives of the mapping (theta1, theta2) -> (low, high).
  double dlow_dtheta1 = 0.0;
  double dhigh_dtheta1 = 0.0;
  double dhigh_dtheta2 = 0.0;
};

Cutoffs ComputeCutoffs(double theta1, double theta2, int sample_rate);

double HzToMel(double hz);
double MelToHz(double mel);
double HzToRad(double hz, int sample_rate);
double RadToHz(double rad, int sample_rate);

// Band edges at F+1 equally spaced mel points over [30 Hz, sr/2 - 50 Hz];
// filter i spans edges i and i+1. Bands narrower than the minimum bandwidth
// are widened upward to it. All gains start at 1.
SincParams InitMel(const FrontendConfig& config);

// Band edges (Hz) of the mel grid InitMel uses.
std::vector<double> MelEdgesHz(const FrontendConfig& config);

// (w2/pi) sinc(w2 n) - (w1/pi) sinc(w1 n), sinc(0) = 1.
double Prototype(double low, double high, long n);

// 0.54 - 0.46 cos(2 pi n / (L - 1)).
double HammingTap(int n, int length);

// F x L taps, row-major.
struct FilterBank {
  int n_filters = 0;
  int length = 0;
  std::vector<double> taps;

  std::span<const double> filter(int i) const {
    return {taps.data() + static_cast<size_t>(i) * length,
            static_cast<size_t>(length)};
  }
};

FilterBank Materialize(const SincParams& params, const FrontendConfig& config);

// Magnitude response in dB of one linear-phase filter at bins 0..n_fft/2 of an
// n_fft-point grid.
std::vector<double> MagnitudeResponseDb(std::span<const double> taps,
                                        int n_fft = 4096);

// T x frame_len, row-major, frame t starting at sample t * hop.
struct Frames {
  size_t count = 0;
  size_t frame_len = 0;
  std::vector<double> data;

  std::span<const double> frame(size_t t) const {
    return {data.data() + t * frame_len, frame_len};
  }
};

Frames FrameSignal(const AudioClip& clip, const FrontendConfig& config);
// Frames [first, first + count) of a clip, without copying the whole clip.
Frames FrameRange(std::span<const double> samples, size_t first, size_t count,
                  const FrontendConfig& config);
size_t FrameCount(size_t n_samples, const FrontendConfig& config);

// F x T grid of natural-log sub-band energies, filter-major.
struct FeatureMap {
  int n_filters = 0;
  int n_frames = 0;
  std::vector<double> values;
  std::vector<double> frame_times;  // seconds, frame start

  double at(int filter, int frame) const {
    return values[static_cast<size_t>(filter) * n_frames + frame];
  }
  double& at(int filter, int frame) {
    return values[static_cast<size_t>(filter) * n_frames + frame];
  }
  // Columns [first, first + count) as a new map.
  FeatureMap Columns(int first, int count) const;
};

struct SincGrad {
  std::vector<double> theta1;
  std::vector<double> theta2;
  std::vector<double> gain;
};

// Forward pass over a set of frames that keeps what the backward pass needs.
//
// Energies are evaluated as u^T G u, where u holds the R+1 distinct taps of
// a symmetric filter and G is the folded Gram matrix of the frame's shifted
// samples. G is shared by all filters, so the per-filter cost drops from
// (frame_len - L + 1) * L to (R+1)^2 and the product G u needed by the
// backward pass falls out of the forward pass.
class SincExtraction {
 public:
  SincExtraction(const SincParams& params, const Frames& frames,
                 const FrontendConfig& config);

  const FeatureMap& features() const { return features_; }
  // Raw energies sum_n |(x_t * s_i)[n]|^2, filter-major like features().
  const std::vector<double>& energies() const { return energies_; }

  // upstream is dLoss/dFeature, F x T filter-major.
  SincGrad Backward(std::span<const double> upstream) const;

 private:
  SincParams params_;
  FrontendConfig config_;
  int n_frames_ = 0;
  std::vector<double> folded_taps_;  // F x (R+1)
  std::vector<double> gram_times_taps_;  // F x T(R+1)
  std::vector<double> energies_;
  FeatureMap features_;
};

FeatureMap Extract(const SincParams& params, const Frames& frames,
                   const FrontendConfig& config);

SincGrad ExtractBackward(const SincParams& params, const Frames& frames,
                         const FrontendConfig& config,
                         std::span<const double> upstream);

}  // namespace sqdr

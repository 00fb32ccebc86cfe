#include "sqdr/layers.h"

#include <algorithm>
#include <cmath>

#include "sqdr/error.h"

namespace sqdr {

namespace {

void Require(bool ok, ErrorKind kind, const std::string& msg) {
  if (!ok) throw Error(kind, msg);
}

void RequireRank4(const Tensor& x, const char* op) {
  Require(x.rank() == 4, ErrorKind::kShapeMismatch,
          std::string(op) + " expects N x C x H x W input, got " + x.ShapeString());
}

template <typename T>
const T& Cached(const std::optional<T>& slot, const char* op) {
  if (!slot) {
    throw Error(ErrorKind::kBackwardBeforeForward, std::string(op) + " has no forward state");
  }
  return *slot;
}

void HeUniform(Tensor& w, size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.data()) v = rng.Uniform(-bound, bound);
}

// Keeps sigmoid outputs strictly inside (0, 1); 1 - 2^-53 is the largest
// double below 1.
constexpr double kSigmoidEdge = 0x1.0p-53;

}  // namespace

// ---- kernels ---------------------------------------------------------------

Tensor PatchifyConv(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  RequireRank4(input, "patchify_conv");
  Require(weights.rank() == 4 && weights.dim(2) == weights.dim(3) &&
              weights.dim(1) == input.dim(1),
          ErrorKind::kShapeMismatch,
          "patchify weights " + weights.ShapeString() + " vs input " + input.ShapeString());
  const size_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const size_t Cout = weights.dim(0), P = weights.dim(2);
  Require(H % P == 0 && W % P == 0, ErrorKind::kShapeMismatch,
          "input " + input.ShapeString() + " is not a multiple of the patch size");
  Require(bias.size() == 0 || bias.size() == Cout, ErrorKind::kShapeMismatch,
          "patchify bias size");
  const size_t Ho = H / P, Wo = W / P;
  Tensor out({N, Cout, Ho, Wo});
  for (size_t n = 0; n < N; ++n) {
    for (size_t o = 0; o < Cout; ++o) {
      const double b = bias.size() ? bias[o] : 0.0;
      for (size_t y = 0; y < Ho; ++y) {
        for (size_t x = 0; x < Wo; ++x) {
          double acc = b;
          for (size_t ci = 0; ci < Cin; ++ci) {
            for (size_t py = 0; py < P; ++py) {
              for (size_t px = 0; px < P; ++px) {
                acc += weights.at(o, ci, py, px) * input.at(n, ci, y * P + py, x * P + px);
              }
            }
          }
          out.at(n, o, y, x) = acc;
        }
      }
    }
  }
  return out;
}

Tensor DepthwiseConv3x3(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  RequireRank4(input, "depthwise_conv3x3");
  const size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  Require(weights.size() == C * 9, ErrorKind::kShapeMismatch,
          "depthwise weights " + weights.ShapeString() + " for " + std::to_string(C) +
              " channels");
  Require(bias.size() == 0 || bias.size() == C, ErrorKind::kShapeMismatch,
          "depthwise bias size");
  Tensor out(input.shape());
  for (size_t n = 0; n < N; ++n) {
    for (size_t c = 0; c < C; ++c) {
      const double* k = weights.data().data() + c * 9;
      const double b = bias.size() ? bias[c] : 0.0;
      for (size_t y = 0; y < H; ++y) {
        for (size_t x = 0; x < W; ++x) {
          double acc = b;
          for (int ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(y) + ky - 1;
            if (yy < 0 || yy >= static_cast<long>(H)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const long xx = static_cast<long>(x) + kx - 1;
              if (xx < 0 || xx >= static_cast<long>(W)) continue;
              acc += k[ky * 3 + kx] * input.at(n, c, yy, xx);
            }
          }
          out.at(n, c, y, x) = acc;
        }
      }
    }
  }
  return out;
}

Tensor GroupedPointwise(const Tensor& input, const Tensor& weights,
                        const Tensor& bias, size_t groups) {
  RequireRank4(input, "grouped_pointwise");
  const size_t N = input.dim(0), Cin = input.dim(1), HW = input.dim(2) * input.dim(3);
  Require(groups > 0 && weights.rank() >= 2, ErrorKind::kShapeMismatch,
          "grouped_pointwise weights " + weights.ShapeString());
  const size_t Cout = weights.dim(0);
  Require(Cin % groups == 0 && Cout % groups == 0, ErrorKind::kIndivisibleChannels,
          std::to_string(Cin) + "->" + std::to_string(Cout) + " channels with " +
              std::to_string(groups) + " groups");
  const size_t cin_g = Cin / groups, cout_g = Cout / groups;
  Require(weights.size() == Cout * cin_g, ErrorKind::kShapeMismatch,
          "grouped_pointwise weights " + weights.ShapeString());
  Require(bias.size() == 0 || bias.size() == Cout, ErrorKind::kShapeMismatch,
          "grouped_pointwise bias size");
  Tensor out({N, Cout, input.dim(2), input.dim(3)});
  for (size_t n = 0; n < N; ++n) {
    for (size_t o = 0; o < Cout; ++o) {
      const size_t first_in = (o / cout_g) * cin_g;
      double* dst = out.data().data() + (n * Cout + o) * HW;
      std::fill_n(dst, HW, bias.size() ? bias[o] : 0.0);
      for (size_t k = 0; k < cin_g; ++k) {
        const double w = weights[o * cin_g + k];
        const double* src = input.data().data() + (n * Cin + first_in + k) * HW;
        for (size_t p = 0; p < HW; ++p) dst[p] += w * src[p];
      }
    }
  }
  return out;
}

Tensor Relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

double Sigmoid(double x) {
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(s, kSigmoidEdge, 1.0 - kSigmoidEdge);
}

Tensor Sigmoid(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = Sigmoid(v);
  return out;
}

Tensor BatchNormInference(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                          const Tensor& mean, const Tensor& var, double epsilon) {
  RequireRank4(input, "batch_norm");
  const size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  Require(gamma.size() == C && beta.size() == C && mean.size() == C && var.size() == C,
          ErrorKind::kShapeMismatch, "batch_norm parameters for " + std::to_string(C) +
                                         " channels");
  Tensor out(input.shape());
  for (size_t c = 0; c < C; ++c) {
    const double inv_std = 1.0 / std::sqrt(var[c] + epsilon);
    for (size_t n = 0; n < N; ++n) {
      const size_t base = (n * C + c) * HW;
      for (size_t p = 0; p < HW; ++p) {
        out[base + p] = gamma[c] * ((input[base + p] - mean[c]) * inv_std) + beta[c];
      }
    }
  }
  return out;
}

Tensor GlobalAvgPool(const Tensor& input) {
  RequireRank4(input, "global_avg_pool");
  const size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  Require(HW > 0, ErrorKind::kShapeMismatch, "global_avg_pool over empty plane");
  Tensor out({N, C});
  for (size_t n = 0; n < N; ++n) {
    for (size_t c = 0; c < C; ++c) {
      const double* src = input.data().data() + (n * C + c) * HW;
      double acc = 0.0;
      for (size_t p = 0; p < HW; ++p) acc += src[p];
      out[n * C + c] = acc / static_cast<double>(HW);
    }
  }
  return out;
}

Tensor Linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  Require(input.rank() == 2 && weights.size() == input.dim(1) && bias.size() == 1,
          ErrorKind::kShapeMismatch,
          "linear input " + input.ShapeString() + " weights " + weights.ShapeString());
  const size_t N = input.dim(0), C = input.dim(1);
  Tensor out({N, 1});
  for (size_t n = 0; n < N; ++n) {
    double acc = bias[0];
    for (size_t c = 0; c < C; ++c) acc += weights[c] * input[n * C + c];
    out[n] = acc;
  }
  return out;
}

// ---- PatchifyLayer ----------------------------------------------------------

PatchifyLayer::PatchifyLayer(const std::string& name, size_t in_channels,
                             size_t out_channels, size_t patch)
    : weight(name + ".weight", {out_channels, in_channels, patch, patch}),
      bias(name + ".bias", {out_channels}),
      patch_(patch) {}

Tensor PatchifyLayer::Forward(const Tensor& x) {
  input_ = x;
  return PatchifyConv(x, weight.value, bias.value);
}

Tensor PatchifyLayer::Backward(const Tensor& dy) {
  const Tensor& x = Cached(input_, "patchify_conv");
  const size_t N = x.dim(0), Cin = x.dim(1), P = patch_;
  const size_t Cout = dy.dim(1), Ho = dy.dim(2), Wo = dy.dim(3);
  Tensor dx(x.shape());
  for (size_t n = 0; n < N; ++n) {
    for (size_t o = 0; o < Cout; ++o) {
      for (size_t y = 0; y < Ho; ++y) {
        for (size_t xo = 0; xo < Wo; ++xo) {
          const double g = dy.at(n, o, y, xo);
          bias.grad[o] += g;
          for (size_t ci = 0; ci < Cin; ++ci) {
            for (size_t py = 0; py < P; ++py) {
              for (size_t px = 0; px < P; ++px) {
                weight.grad.at(o, ci, py, px) += g * x.at(n, ci, y * P + py, xo * P + px);
                dx.at(n, ci, y * P + py, xo * P + px) += g * weight.value.at(o, ci, py, px);
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

void PatchifyLayer::Initialize(Rng& rng) {
  HeUniform(weight.value, weight.value.dim(1) * patch_ * patch_, rng);
  bias.value.Fill(0.0);
}

void PatchifyLayer::Collect(std::vector<ParamSlot*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---- DepthwiseLayer ---------------------------------------------------------

DepthwiseLayer::DepthwiseLayer(const std::string& name, size_t channels, bool with_bias)
    : weight(name + ".weight", {channels, 1, 3, 3}) {
  if (with_bias) bias.emplace(name + ".bias", std::vector<size_t>{channels});
}

Tensor DepthwiseLayer::Forward(const Tensor& x) {
  input_ = x;
  return DepthwiseConv3x3(x, weight.value, bias ? bias->value : Tensor());
}

Tensor DepthwiseLayer::Backward(const Tensor& dy) {
  const Tensor& x = Cached(input_, "depthwise_conv3x3");
  const size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor dx(x.shape());
  for (size_t n = 0; n < N; ++n) {
    for (size_t c = 0; c < C; ++c) {
      const double* k = weight.value.data().data() + c * 9;
      double* dk = weight.grad.data().data() + c * 9;
      for (size_t y = 0; y < H; ++y) {
        for (size_t xo = 0; xo < W; ++xo) {
          const double g = dy.at(n, c, y, xo);
          if (bias) bias->grad[c] += g;
          for (int ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(y) + ky - 1;
            if (yy < 0 || yy >= static_cast<long>(H)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const long xx = static_cast<long>(xo) + kx - 1;
              if (xx < 0 || xx >= static_cast<long>(W)) continue;
              dk[ky * 3 + kx] += g * x.at(n, c, yy, xx);
              dx.at(n, c, yy, xx) += g * k[ky * 3 + kx];
            }
          }
        }
      }
    }
  }
  return dx;
}

void DepthwiseLayer::Initialize(Rng& rng) {
  HeUniform(weight.value, 9, rng);
  if (bias) bias->value.Fill(0.0);
}

void DepthwiseLayer::Collect(std::vector<ParamSlot*>& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

// ---- PointwiseLayer ---------------------------------------------------------

PointwiseLayer::PointwiseLayer(const std::string& name, size_t in_channels,
                               size_t out_channels, size_t groups, bool with_bias)
    : weight(name + ".weight", {out_channels, groups ? in_channels / groups : 0}),
      groups_(groups) {
  if (groups == 0 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw Error(ErrorKind::kIndivisibleChannels,
                name + ": " + std::to_string(in_channels) + "->" +
                    std::to_string(out_channels) + " channels with " +
                    std::to_string(groups) + " groups");
  }
  if (with_bias) bias.emplace(name + ".bias", std::vector<size_t>{out_channels});
}

Tensor PointwiseLayer::Forward(const Tensor& x) {
  input_ = x;
  return GroupedPointwise(x, weight.value, bias ? bias->value : Tensor(), groups_);
}

Tensor PointwiseLayer::Backward(const Tensor& dy) {
  const Tensor& x = Cached(input_, "grouped_pointwise");
  const size_t N = x.dim(0), Cin = x.dim(1), HW = x.dim(2) * x.dim(3);
  const size_t Cout = dy.dim(1);
  const size_t cin_g = Cin / groups_, cout_g = Cout / groups_;
  Tensor dx(x.shape());
  for (size_t n = 0; n < N; ++n) {
    for (size_t o = 0; o < Cout; ++o) {
      const size_t first_in = (o / cout_g) * cin_g;
      const double* g = dy.data().data() + (n * Cout + o) * HW;
      if (bias) {
        double acc = 0.0;
        for (size_t p = 0; p < HW; ++p) acc += g[p];
        bias->grad[o] += acc;
      }
      for (size_t k = 0; k < cin_g; ++k) {
        const double w = weight.value[o * cin_g + k];
        const double* src = x.data().data() + (n * Cin + first_in + k) * HW;
        double* dsrc = dx.data().data() + (n * Cin + first_in + k) * HW;
        double acc = 0.0;
        for (size_t p = 0; p < HW; ++p) {
          acc += g[p] * src[p];
          dsrc[p] += g[p] * w;
        }
        weight.grad[o * cin_g + k] += acc;
      }
    }
  }
  return dx;
}

void PointwiseLayer::Initialize(Rng& rng) {
  HeUniform(weight.value, weight.value.dim(1), rng);
  if (bias) bias->value.Fill(0.0);
}

void PointwiseLayer::Collect(std::vector<ParamSlot*>& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

// ---- BatchNormLayer ---------------------------------------------------------

BatchNormLayer::BatchNormLayer(const std::string& name, size_t channels)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false) {
  gamma.value.Fill(1.0);
  running_var.value.Fill(1.0);
}

Tensor BatchNormLayer::Forward(const Tensor& x, Mode mode) {
  RequireRank4(x, "batch_norm");
  const size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Require(C == gamma.value.size(), ErrorKind::kShapeMismatch,
          "batch_norm channels " + std::to_string(C));
  const size_t count = N * HW;
  Cache cache{mode, Tensor(x.shape()), std::vector<double>(C)};
  Tensor out(x.shape());
  for (size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      if (count < 2) {
        throw Error(ErrorKind::kDegenerateBatch,
                    "batch_norm needs N*H*W >= 2 per channel in train mode");
      }
      double acc = 0.0;
      for (size_t n = 0; n < N; ++n) {
        const double* src = x.data().data() + (n * C + c) * HW;
        for (size_t p = 0; p < HW; ++p) acc += src[p];
      }
      mean = acc / static_cast<double>(count);
      double sq = 0.0;
      for (size_t n = 0; n < N; ++n) {
        const double* src = x.data().data() + (n * C + c) * HW;
        for (size_t p = 0; p < HW; ++p) sq += (src[p] - mean) * (src[p] - mean);
      }
      var = sq / static_cast<double>(count);
      running_mean.value[c] = (1.0 - kMomentum) * running_mean.value[c] + kMomentum * mean;
      running_var.value[c] = (1.0 - kMomentum) * running_var.value[c] + kMomentum * var;
    } else {
      mean = running_mean.value[c];
      var = running_var.value[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
    cache.inv_std[c] = inv_std;
    for (size_t n = 0; n < N; ++n) {
      const size_t base = (n * C + c) * HW;
      for (size_t p = 0; p < HW; ++p) {
        const double xhat = (x[base + p] - mean) * inv_std;
        cache.normalized[base + p] = xhat;
        out[base + p] = gamma.value[c] * xhat + beta.value[c];
      }
    }
  }
  cache_ = std::move(cache);
  return out;
}

Tensor BatchNormLayer::Backward(const Tensor& dy) {
  const Cache& cache = Cached(cache_, "batch_norm");
  const Tensor& xhat = cache.normalized;
  const size_t N = xhat.dim(0), C = xhat.dim(1), HW = xhat.dim(2) * xhat.dim(3);
  const auto count = static_cast<double>(N * HW);
  Tensor dx(xhat.shape());
  for (size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (size_t n = 0; n < N; ++n) {
      const size_t base = (n * C + c) * HW;
      for (size_t p = 0; p < HW; ++p) {
        sum_dy += dy[base + p];
        sum_dy_xhat += dy[base + p] * xhat[base + p];
      }
    }
    gamma.grad[c] += sum_dy_xhat;
    beta.grad[c] += sum_dy;
    const double g = gamma.value[c];
    const double inv_std = cache.inv_std[c];
    for (size_t n = 0; n < N; ++n) {
      const size_t base = (n * C + c) * HW;
      for (size_t p = 0; p < HW; ++p) {
        if (cache.mode == Mode::kTrain) {
          dx[base + p] = g * inv_std / count *
                         (count * dy[base + p] - sum_dy - xhat[base + p] * sum_dy_xhat);
        } else {
          dx[base + p] = g * inv_std * dy[base + p];
        }
      }
    }
  }
  return dx;
}

void BatchNormLayer::Collect(std::vector<ParamSlot*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

// ---- activations and head ---------------------------------------------------

Tensor ReluLayer::Forward(const Tensor& x) {
  input_ = x;
  return Relu(x);
}

Tensor ReluLayer::Backward(const Tensor& dy) {
  const Tensor& x = Cached(input_, "relu");
  Tensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) {
    if (!(x[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

Tensor SigmoidLayer::Forward(const Tensor& x) {
  output_ = Sigmoid(x);
  return *output_;
}

Tensor SigmoidLayer::Backward(const Tensor& dy) {
  const Tensor& y = Cached(output_, "sigmoid");
  Tensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
  return dx;
}

Tensor GlobalAvgPoolLayer::Forward(const Tensor& x) {
  input_shape_ = x.shape();
  return GlobalAvgPool(x);
}

Tensor GlobalAvgPoolLayer::Backward(const Tensor& dy) {
  const auto& shape = Cached(input_shape_, "global_avg_pool");
  const size_t N = shape[0], C = shape[1], HW = shape[2] * shape[3];
  Tensor dx(shape);
  for (size_t n = 0; n < N; ++n) {
    for (size_t c = 0; c < C; ++c) {
      const double g = dy[n * C + c] / static_cast<double>(HW);
      std::fill_n(dx.data().data() + (n * C + c) * HW, HW, g);
    }
  }
  return dx;
}

LinearLayer::LinearLayer(const std::string& name, size_t in_features)
    : weight(name + ".weight", {1, in_features}), bias(name + ".bias", {1}) {}

Tensor LinearLayer::Forward(const Tensor& x) {
  input_ = x;
  return Linear(x, weight.value, bias.value);
}

Tensor LinearLayer::Backward(const Tensor& dy) {
  const Tensor& x = Cached(input_, "linear");
  const size_t N = x.dim(0), C = x.dim(1);
  Tensor dx(x.shape());
  for (size_t n = 0; n < N; ++n) {
    const double g = dy[n];
    bias.grad[0] += g;
    for (size_t c = 0; c < C; ++c) {
      weight.grad[c] += g * x[n * C + c];
      dx[n * C + c] = g * weight.value[c];
    }
  }
  return dx;
}

void LinearLayer::Initialize(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(weight.value.size()));
  for (double& v : weight.value.data()) v = rng.Uniform(-bound, bound);
  bias.value.Fill(0.0);
}

void LinearLayer::Collect(std::vector<ParamSlot*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

}  // namespace sqdr

#pragma once

// Forward kernels and layer objects for the VAD network. Every layer works on
// N x C x H x W tensors, caches what its backward pass needs during Forward,
// and accumulates (+=) parameter gradients in Backward so a parameter reached
// along several paths receives the sum of their contributions. Calling
// Backward before any Forward throws kBackwardBeforeForward.

#include <optional>
#include <string>
#include <vector>

#include "sqdr/rng.h"
#include "sqdr/tensor.h"

namespace sqdr {

enum class Mode { kTrain, kEval };

// ---- stateless kernels ----------------------------------------------------

// Stride-`patch` valid convolution. input N x Cin x H x W with H, W multiples
// of patch; weights Cout x Cin x patch x patch; bias Cout (may be empty).
Tensor PatchifyConv(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Per-channel 3x3 convolution, zero padding 1. weights C x 1 x 3 x 3.
Tensor DepthwiseConv3x3(const Tensor& input, const Tensor& weights, const Tensor& bias);

// 1x1 convolution with `groups` channel groups. weights Cout x (Cin/groups).
Tensor GroupedPointwise(const Tensor& input, const Tensor& weights,
                        const Tensor& bias, size_t groups);

Tensor Relu(const Tensor& input);
Tensor Sigmoid(const Tensor& input);
double Sigmoid(double x);
// Eval-mode batch norm from stored statistics.
Tensor BatchNormInference(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                          const Tensor& mean, const Tensor& var, double epsilon);
// N x C x H x W -> N x C.
Tensor GlobalAvgPool(const Tensor& input);
// N x C -> N x 1 with weights 1 x C, bias 1.
Tensor Linear(const Tensor& input, const Tensor& weights, const Tensor& bias);

// ---- layers ---------------------------------------------------------------

class PatchifyLayer {
 public:
  PatchifyLayer(const std::string& name, size_t in_channels, size_t out_channels,
                size_t patch);
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);
  void Initialize(Rng& rng);
  void Collect(std::vector<ParamSlot*>& out);

  ParamSlot weight;
  ParamSlot bias;

 private:
  size_t patch_;
  std::optional<Tensor> input_;
};

class DepthwiseLayer {
 public:
  DepthwiseLayer(const std::string& name, size_t channels, bool with_bias);
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);
  void Initialize(Rng& rng);
  void Collect(std::vector<ParamSlot*>& out);

  ParamSlot weight;
  std::optional<ParamSlot> bias;

 private:
  std::optional<Tensor> input_;
};

// groups == 1 gives a dense pointwise convolution.
class PointwiseLayer {
 public:
  PointwiseLayer(const std::string& name, size_t in_channels, size_t out_channels,
                 size_t groups, bool with_bias);
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);
  void Initialize(Rng& rng);
  void Collect(std::vector<ParamSlot*>& out);

  ParamSlot weight;
  std::optional<ParamSlot> bias;
  size_t groups() const { return groups_; }

 private:
  size_t groups_;
  std::optional<Tensor> input_;
};

// Train mode normalizes with the biased batch variance over (N, H, W) and
// moves the running statistics with momentum 0.1; eval mode uses them.
class BatchNormLayer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNormLayer(const std::string& name, size_t channels);
  Tensor Forward(const Tensor& x, Mode mode);
  Tensor Backward(const Tensor& dy);
  void Collect(std::vector<ParamSlot*>& out);

  ParamSlot gamma;
  ParamSlot beta;
  ParamSlot running_mean;
  ParamSlot running_var;

 private:
  struct Cache {
    Mode mode;
    Tensor normalized;
    std::vector<double> inv_std;
  };
  std::optional<Cache> cache_;
};

class ReluLayer {
 public:
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);

 private:
  std::optional<Tensor> input_;
};

class SigmoidLayer {
 public:
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);

 private:
  std::optional<Tensor> output_;
};

class GlobalAvgPoolLayer {
 public:
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);

 private:
  std::optional<std::vector<size_t>> input_shape_;
};

class LinearLayer {
 public:
  LinearLayer(const std::string& name, size_t in_features);
  Tensor Forward(const Tensor& x);
  Tensor Backward(const Tensor& dy);
  void Initialize(Rng& rng);
  void Collect(std::vector<ParamSlot*>& out);

  ParamSlot weight;
  ParamSlot bias;

 private:
  std::optional<Tensor> input_;
};

}  // namespace sqdr

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqdr/layers.h"
#include "sqdr/signal_io.h"
#include "sqdr/sinc_frontend.h"
#include "sqdr/tensor.h"

namespace sqdr {

struct ModelConfig {
  int channels = 48;
  int n_encoders = 3;
  int patch = 8;
  int groups = 8;
  FrontendConfig frontend;

  // Throws kInvalidConfig naming the violated constraint.
  void Validate() const;
  bool operator==(const ModelConfig& other) const;
};

// Learnable-scalar count derived from the layer formulas alone (no model
// instance). Must agree with Model::ParamCount.
size_t ClosedFormParamCount(const ModelConfig& config);

// One dual-path encoder: the first half of the channels runs
// depthwise 3x3 -> batch norm -> ReLU -> grouped pointwise, the second half
// passes through, the halves are concatenated and the layer input is added.
class EncoderLayer {
 public:
  EncoderLayer(const std::string& name, size_t channels, size_t groups);
  Tensor Forward(const Tensor& x, Mode mode);
  Tensor Backward(const Tensor& dy);
  // Stateless eval-mode forward.
  Tensor Infer(const Tensor& x) const;
  void Initialize(Rng& rng);
  void Collect(std::vector<ParamSlot*>& out);

  DepthwiseLayer depthwise;
  BatchNormLayer norm;
  ReluLayer relu;
  PointwiseLayer pointwise;

 private:
  size_t half_;
};

// Sinc front-end parameters plus the network
// patchify -> 3 x encoder -> dense pointwise -> batch norm -> ReLU
//          -> global average pool -> linear -> sigmoid.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  // Mel-initialized front-end, He-uniform convolutions, seeded.
  static Model Build(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Every slot in definition order (front-end first), running statistics
  // included.
  std::vector<ParamSlot*> Slots();
  std::vector<const ParamSlot*> Slots() const;
  // Learnable slots only.
  std::vector<ParamSlot*> Params();
  size_t ParamCount() const;

  SincParams frontend_params() const;
  void set_frontend_params(const SincParams& params);
  void AddFrontendGrad(const SincGrad& grad);

  // Stacks feature maps into N x 1 x F x T', right-padding every map with
  // log(floor) columns to T' = the smallest multiple of the patch >= max T.
  Tensor PackFeatures(std::span<const FeatureMap> features) const;

  // Network only. Returns N x 1 probabilities and caches for Backward.
  Tensor ForwardNetwork(const Tensor& input, Mode mode);
  // dprob is N x 1; returns dLoss/dInput with the input's shape.
  Tensor BackwardNetwork(const Tensor& dprob);

  // Stateless eval-mode scoring; safe to call concurrently.
  double Forward(const FeatureMap& features) const;
  std::vector<double> ForwardBatch(std::span<const FeatureMap> features) const;

  // Eval-mode scoring of raw audio through the front-end.
  double Score(const AudioClip& clip) const;

 private:
  Tensor InferNetwork(const Tensor& input) const;

  ModelConfig config_;
  ParamSlot theta1_;
  ParamSlot theta2_;
  ParamSlot gain_;
  PatchifyLayer patchify_;
  std::vector<EncoderLayer> encoders_;
  PointwiseLayer mixer_;
  BatchNormLayer mixer_norm_;
  ReluLayer mixer_relu_;
  GlobalAvgPoolLayer pool_;
  LinearLayer classifier_;
  SigmoidLayer sigmoid_;
};

// Window scores over a clip: window_stream -> features -> eval forward.
// When the stride is a whole number of hops the clip is framed once and
// windows reuse its feature columns, which is bitwise identical to framing
// each window separately.
std::vector<std::pair<double, double>> PredictWindows(const Model& model,
                                                      const AudioClip& clip,
                                                      double window_s, double stride_s);

// ---- checkpoints ----------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  uint64_t epoch = 0;
  uint64_t seed = 0;
};

// Little-endian layout:
//   "SQDR" | u32 version | u32 n, n bytes config text (key=value lines)
//   | u32 sections | per section: u32 n + name, u8 kind (0 param, 1 buffer),
//     u32 rank, u64 dims[rank], f64 values
//   | u8 has_momentum | per learnable section: f64 momentum values
//   | u64 epoch | u64 seed
void SaveCheckpoint(const Model& model, const std::filesystem::path& path,
                    const CheckpointMeta& meta = {}, bool with_momentum = true);

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
  bool has_momentum = false;
};

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);
// Loads into an existing model; throws kInvalidConfig if the stored config
// differs from model.config().
CheckpointMeta LoadCheckpointInto(Model& model, const std::filesystem::path& path);

std::string SerializeConfig(const ModelConfig& config);
ModelConfig ParseConfigRecord(const std::string& text);

}  // namespace sqdr

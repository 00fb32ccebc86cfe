#include "sqdr/vad_model.h"

#include <algorithm>
#include <cmath>

#include "sqdr/error.h"
#include "sqdr/rng.h"

namespace sqdr {

namespace {

// Copies channels [first, first + count) of an N x C x H x W tensor.
Tensor SliceChannels(const Tensor& x, size_t first, size_t count) {
  const size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out({N, count, x.dim(2), x.dim(3)});
  for (size_t n = 0; n < N; ++n) {
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>((n * C + first) * HW),
                count * HW,
                out.data().begin() + static_cast<std::ptrdiff_t>(n * count * HW));
  }
  return out;
}

// out[:, first:first+count] += src
void AddChannels(Tensor& out, const Tensor& src, size_t first) {
  const size_t N = out.dim(0), C = out.dim(1), HW = out.dim(2) * out.dim(3);
  const size_t count = src.dim(1);
  for (size_t n = 0; n < N; ++n) {
    double* dst = out.data().data() + (n * C + first) * HW;
    const double* s = src.data().data() + n * count * HW;
    for (size_t i = 0; i < count * HW; ++i) dst[i] += s[i];
  }
}

// concat(a, x_B) + x, i.e. [a + x_A, 2 x_B].
Tensor MergePaths(const Tensor& x, const Tensor& a) {
  Tensor out = x;
  const size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const size_t half = C / 2;
  AddChannels(out, a, 0);
  for (size_t n = 0; n < N; ++n) {
    double* dst = out.data().data() + (n * C + half) * HW;
    for (size_t i = 0; i < (C - half) * HW; ++i) dst[i] += dst[i];
  }
  return out;
}

}  // namespace

void ModelConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidConfig, msg); };
  frontend.Validate();
  if (channels <= 0 || channels % 2 != 0) fail("channels must be positive and even");
  if (groups <= 0 || (channels / 2) % groups != 0) {
    fail("channels/2 must be divisible by groups");
  }
  if (patch != 8) fail("patch must be 8");
  if (n_encoders < 0) fail("n_encoders must be >= 0");
  if (frontend.n_filters % patch != 0) fail("n_filters must be a multiple of patch");
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  const auto& a = frontend;
  const auto& b = o.frontend;
  return channels == o.channels && n_encoders == o.n_encoders && patch == o.patch &&
         groups == o.groups && a.n_filters == b.n_filters && a.half_len == b.half_len &&
         a.frame_len == b.frame_len && a.hop_len == b.hop_len &&
         a.sample_rate == b.sample_rate && a.log_floor == b.log_floor;
}

size_t ClosedFormParamCount(const ModelConfig& config) {
  const size_t c = static_cast<size_t>(config.channels);
  const size_t h = c / 2;
  const size_t g = static_cast<size_t>(config.groups);
  const size_t p = static_cast<size_t>(config.patch);
  const size_t frontend = 3 * static_cast<size_t>(config.frontend.n_filters);
  const size_t patchify = c * p * p + c;
  // depthwise (no bias, feeds batch norm) + batch norm + grouped pointwise
  const size_t encoder = 9 * h + 2 * h + h * (h / g) + h;
  // dense pointwise (no bias) + batch norm
  const size_t mixer = c * c + 2 * c;
  const size_t classifier = c + 1;
  return frontend + patchify + static_cast<size_t>(config.n_encoders) * encoder + mixer +
         classifier;
}

// ---- EncoderLayer -----------------------------------------------------------

EncoderLayer::EncoderLayer(const std::string& name, size_t channels, size_t groups)
    : depthwise(name + ".depthwise", channels / 2, false),
      norm(name + ".norm", channels / 2),
      pointwise(name + ".pointwise", channels / 2, channels / 2, groups, true),
      half_(channels / 2) {}

Tensor EncoderLayer::Forward(const Tensor& x, Mode mode) {
  Tensor a = SliceChannels(x, 0, half_);
  a = depthwise.Forward(a);
  a = norm.Forward(a, mode);
  a = relu.Forward(a);
  a = pointwise.Forward(a);
  return MergePaths(x, a);
}

Tensor EncoderLayer::Backward(const Tensor& dy) {
  // Residual and bypass: d/dx of [a + x_A, 2 x_B] w.r.t. x directly.
  Tensor dx = dy;
  const size_t N = dy.dim(0), C = dy.dim(1), HW = dy.dim(2) * dy.dim(3);
  for (size_t n = 0; n < N; ++n) {
    double* d = dx.data().data() + (n * C + half_) * HW;
    for (size_t i = 0; i < (C - half_) * HW; ++i) d[i] += d[i];
  }
  Tensor da = SliceChannels(dy, 0, half_);
  da = pointwise.Backward(da);
  da = relu.Backward(da);
  da = norm.Backward(da);
  da = depthwise.Backward(da);
  AddChannels(dx, da, 0);
  return dx;
}

Tensor EncoderLayer::Infer(const Tensor& x) const {
  Tensor a = SliceChannels(x, 0, half_);
  a = DepthwiseConv3x3(a, depthwise.weight.value, Tensor());
  a = BatchNormInference(a, norm.gamma.value, norm.beta.value, norm.running_mean.value,
                         norm.running_var.value, BatchNormLayer::kEpsilon);
  a = Relu(a);
  a = GroupedPointwise(a, pointwise.weight.value, pointwise.bias->value, pointwise.groups());
  return MergePaths(x, a);
}

void EncoderLayer::Initialize(Rng& rng) {
  depthwise.Initialize(rng);
  pointwise.Initialize(rng);
}

void EncoderLayer::Collect(std::vector<ParamSlot*>& out) {
  depthwise.Collect(out);
  norm.Collect(out);
  pointwise.Collect(out);
}

// ---- Model ------------------------------------------------------------------

Model::Model(const ModelConfig& config)
    : config_((config.Validate(), config)),
      theta1_("frontend.theta1", {static_cast<size_t>(config.frontend.n_filters)}),
      theta2_("frontend.theta2", {static_cast<size_t>(config.frontend.n_filters)}),
      gain_("frontend.gain", {static_cast<size_t>(config.frontend.n_filters)}),
      patchify_("patchify", 1, static_cast<size_t>(config.channels),
                static_cast<size_t>(config.patch)),
      mixer_("mixer", static_cast<size_t>(config.channels),
             static_cast<size_t>(config.channels), 1, false),
      mixer_norm_("mixer_norm", static_cast<size_t>(config.channels)),
      classifier_("classifier", static_cast<size_t>(config.channels)) {
  for (int e = 0; e < config.n_encoders; ++e) {
    encoders_.emplace_back("encoder" + std::to_string(e),
                           static_cast<size_t>(config.channels),
                           static_cast<size_t>(config.groups));
  }
  gain_.value.Fill(1.0);
}

Model Model::Build(const ModelConfig& config, uint64_t seed) {
  Model model(config);
  model.set_frontend_params(InitMel(config.frontend));
  Rng rng(DeriveSeed(seed, "model-init"));
  model.patchify_.Initialize(rng);
  for (auto& e : model.encoders_) e.Initialize(rng);
  model.mixer_.Initialize(rng);
  model.classifier_.Initialize(rng);
  return model;
}

std::vector<ParamSlot*> Model::Slots() {
  std::vector<ParamSlot*> out{&theta1_, &theta2_, &gain_};
  patchify_.Collect(out);
  for (auto& e : encoders_) e.Collect(out);
  mixer_.Collect(out);
  mixer_norm_.Collect(out);
  classifier_.Collect(out);
  return out;
}

std::vector<const ParamSlot*> Model::Slots() const {
  auto slots = const_cast<Model*>(this)->Slots();
  return {slots.begin(), slots.end()};
}

std::vector<ParamSlot*> Model::Params() {
  std::vector<ParamSlot*> out;
  for (ParamSlot* s : Slots()) {
    if (s->learnable) out.push_back(s);
  }
  return out;
}

size_t Model::ParamCount() const {
  size_t n = 0;
  for (const ParamSlot* s : Slots()) {
    if (s->learnable) n += s->value.size();
  }
  return n;
}

SincParams Model::frontend_params() const {
  SincParams p;
  p.theta1 = theta1_.value.vec();
  p.theta2 = theta2_.value.vec();
  p.gain = gain_.value.vec();
  return p;
}

void Model::set_frontend_params(const SincParams& params) {
  const auto F = static_cast<size_t>(config_.frontend.n_filters);
  if (params.theta1.size() != F || params.theta2.size() != F || params.gain.size() != F) {
    throw Error(ErrorKind::kShapeMismatch, "front-end parameter count differs from config");
  }
  theta1_.value.vec() = params.theta1;
  theta2_.value.vec() = params.theta2;
  gain_.value.vec() = params.gain;
}

void Model::AddFrontendGrad(const SincGrad& grad) {
  for (size_t i = 0; i < grad.gain.size(); ++i) {
    theta1_.grad[i] += grad.theta1[i];
    theta2_.grad[i] += grad.theta2[i];
    gain_.grad[i] += grad.gain[i];
  }
}

Tensor Model::PackFeatures(std::span<const FeatureMap> features) const {
  if (features.empty()) throw Error(ErrorKind::kEmptyInput, "no feature maps");
  const auto F = static_cast<size_t>(config_.frontend.n_filters);
  size_t max_t = 0;
  for (const auto& f : features) {
    if (f.n_frames < 1) throw Error(ErrorKind::kEmptyInput, "empty feature map");
    if (static_cast<size_t>(f.n_filters) != F) {
      throw Error(ErrorKind::kShapeMismatch, "feature map has " +
                                                 std::to_string(f.n_filters) + " filters");
    }
    max_t = std::max(max_t, static_cast<size_t>(f.n_frames));
  }
  const auto patch = static_cast<size_t>(config_.patch);
  const size_t T = (max_t + patch - 1) / patch * patch;
  Tensor out({features.size(), 1, F, T}, std::log(config_.frontend.log_floor));
  for (size_t n = 0; n < features.size(); ++n) {
    const auto& f = features[n];
    for (size_t i = 0; i < F; ++i) {
      for (size_t t = 0; t < static_cast<size_t>(f.n_frames); ++t) {
        out.at(n, 0, i, t) = f.at(static_cast<int>(i), static_cast<int>(t));
      }
    }
  }
  return out;
}

Tensor Model::ForwardNetwork(const Tensor& input, Mode mode) {
  Tensor x = patchify_.Forward(input);
  for (auto& e : encoders_) x = e.Forward(x, mode);
  x = mixer_.Forward(x);
  x = mixer_norm_.Forward(x, mode);
  x = mixer_relu_.Forward(x);
  x = pool_.Forward(x);
  x = classifier_.Forward(x);
  return sigmoid_.Forward(x);
}

Tensor Model::BackwardNetwork(const Tensor& dprob) {
  Tensor d = sigmoid_.Backward(dprob);
  d = classifier_.Backward(d);
  d = pool_.Backward(d);
  d = mixer_relu_.Backward(d);
  d = mixer_norm_.Backward(d);
  d = mixer_.Backward(d);
  for (auto it = encoders_.rbegin(); it != encoders_.rend(); ++it) d = it->Backward(d);
  return patchify_.Backward(d);
}

Tensor Model::InferNetwork(const Tensor& input) const {
  Tensor x = PatchifyConv(input, patchify_.weight.value, patchify_.bias.value);
  for (const auto& e : encoders_) x = e.Infer(x);
  x = GroupedPointwise(x, mixer_.weight.value, Tensor(), 1);
  x = BatchNormInference(x, mixer_norm_.gamma.value, mixer_norm_.beta.value,
                         mixer_norm_.running_mean.value, mixer_norm_.running_var.value,
                         BatchNormLayer::kEpsilon);
  x = Relu(x);
  x = GlobalAvgPool(x);
  x = Linear(x, classifier_.weight.value, classifier_.bias.value);
  return Sigmoid(x);
}

double Model::Forward(const FeatureMap& features) const {
  return InferNetwork(PackFeatures(std::span(&features, 1)))[0];
}

std::vector<double> Model::ForwardBatch(std::span<const FeatureMap> features) const {
  const Tensor out = InferNetwork(PackFeatures(features));
  return out.vec();
}

double Model::Score(const AudioClip& clip) const {
  const auto params = frontend_params();
  return Forward(Extract(params, FrameSignal(clip, config_.frontend), config_.frontend));
}

std::vector<std::pair<double, double>> PredictWindows(const Model& model,
                                                      const AudioClip& clip,
                                                      double window_s, double stride_s) {
  const FrontendConfig& fc = model.config().frontend;
  const auto params = model.frontend_params();
  const size_t win = SecondsToSamples(window_s, clip.sample_rate);
  const size_t stride = SecondsToSamples(stride_s, clip.sample_rate);
  std::vector<std::pair<double, double>> out;

  const auto hop = static_cast<size_t>(fc.hop_len);
  if (stride > 0 && stride % hop == 0 && win <= clip.samples.size() && win > 0) {
    const size_t n_windows = WindowCount(clip.samples.size(), win, stride);
    const size_t window_frames = FrameCount(win, fc);
    if (window_frames == 0) {
      throw Error(ErrorKind::kClipTooShort, "window shorter than one frame");
    }
    const size_t frames_needed = (n_windows - 1) * (stride / hop) + window_frames;
    const FeatureMap all =
        Extract(params, FrameRange(clip.samples, 0, frames_needed, fc), fc);
    out.reserve(n_windows);
    for (size_t k = 0; k < n_windows; ++k) {
      const FeatureMap w = all.Columns(static_cast<int>(k * (stride / hop)),
                                       static_cast<int>(window_frames));
      out.emplace_back(static_cast<double>(k * stride) / clip.sample_rate, model.Forward(w));
    }
    return out;
  }

  for (const auto& w : WindowStream(clip, window_s, stride_s)) {
    AudioClip piece{w.samples, clip.sample_rate};
    out.emplace_back(w.source_offset, model.Score(piece));
  }
  return out;
}

}  // namespace sqdr

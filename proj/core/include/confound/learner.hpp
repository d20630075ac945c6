#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confound/augment.hpp"
#include "confound/image.hpp"
#include "confound/rng.hpp"

namespace confound {

enum class Architecture { kLinearProbe, kMlp, kSmallConv };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view name);

/// Binary classifier head. Every architecture first block-averages the input
/// by `input_downsample`, and applies dropout right before the final dense
/// layer (on the pixels themselves for the linear probe).
///
///   kLinearProbe: logit = w . x + b
///   kMlp:         logit = w2 . tanh(W1 x + b1) + b2
///   kSmallConv:   logit = w2 . avgpool(softplus(conv_k(x) + bc)) + b2
struct ModelSpec {
  Architecture arch = Architecture::kLinearProbe;
  std::size_t input_downsample = 2;
  std::size_t hidden_units = 16;  // kMlp
  std::size_t channels = 4;       // kSmallConv
  std::size_t kernel = 3;         // kSmallConv
  double dropout = 0.5;
  Seed init_seed = 0;

  void validate() const;
};

class Model {
 public:
  Model(ModelSpec spec, std::size_t image_width, std::size_t image_height);

  const ModelSpec& spec() const { return spec_; }
  std::size_t image_width() const { return image_width_; }
  std::size_t image_height() const { return image_height_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t input_height() const { return input_height_; }
  std::size_t input_size() const { return input_width_ * input_height_; }
  std::size_t num_params() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Reinitialises parameters from `seed` (linear probe: zeros).
  void initialize(Seed seed);

  /// Downsampled feature vector of one image; throws on size mismatch.
  std::vector<double> features(const Image& img) const;

  /// Logit for one feature vector. `keep` is the dropout keep-mask
  /// (nullptr = evaluation mode, no dropout).
  double logit(std::span<const double> x, const std::vector<std::uint8_t>* keep = nullptr) const;

  /// Adds dlogit/dparams * scale into `grad`; returns the logit.
  double logit_and_grad(std::span<const double> x, const std::vector<std::uint8_t>* keep, double scale,
                        std::span<double> grad) const;

  /// Width of the layer dropout acts on.
  std::size_t dropout_width() const;

 private:
  ModelSpec spec_;
  std::size_t image_width_, image_height_;
  std::size_t input_width_, input_height_;
  std::vector<double> params_;
};

double sigmoid(double z);

/// Evaluation-mode probabilities for a batch of images.
std::vector<double> forward(const Model& model, std::span<const Image> batch);
std::vector<double> predict_logits(const Model& model, std::span<const Image> batch);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean binary cross-entropy and its gradient. With a dropout seed, sample
/// i uses the keep-mask derived from (seed, i); without one, no dropout.
LossGrad loss_and_grad(const Model& model, std::span<const Image> batch, std::span<const int> labels,
                       std::optional<Seed> dropout_seed = std::nullopt);
LossGrad loss_and_grad_features(const Model& model, std::span<const std::vector<double>> features,
                                std::span<const int> labels, std::optional<Seed> dropout_seed = std::nullopt);

std::vector<std::uint8_t> dropout_mask(std::size_t width, double rate, Seed seed);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update in place. Throws on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamParams& hyper);

enum class EarlyStopMetric { kAuto, kValLoss, kValAuc };

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t max_epochs = 200;
  std::size_t patience = 30;
  std::size_t batch_size = 32;
  EarlyStopMetric metric = EarlyStopMetric::kAuto;
  bool augment = true;
  AugmentParams augment_params{};

  void validate() const;
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainedModel {
  Model model;
  std::vector<EpochRecord> history;
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;  // zero-based index into history
  EarlyStopMetric metric = EarlyStopMetric::kValLoss;
};

struct LabeledSet {
  std::vector<Image> images;
  std::vector<int> labels;
};

/// Mini-batch Adam with early stopping; returns the best-validation
/// parameters. kAuto watches validation AUC when the training classes are
/// balanced (within 10%) and validation loss otherwise.
TrainedModel train(const ModelSpec& spec, const LabeledSet& train_set, const LabeledSet& val_set,
                   const TrainConfig& config, Seed seed);

/// Binary checkpoint ("CBMDL", u32 version, architecture, f64 parameters)
/// plus a JSON training-history sidecar at `<path>.history.json`.
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& trained);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace confound

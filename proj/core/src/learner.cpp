#include "confound/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "confound/binary_io.hpp"
#include "confound/stats.hpp"

namespace confound {
namespace {

constexpr std::string_view kCheckpointMagic = "CBMDL";
constexpr std::uint32_t kCheckpointVersion = 1;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double glorot(Engine& eng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(eng, -a, a);
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kLinearProbe: return "linear";
    case Architecture::kMlp: return "mlp";
    case Architecture::kSmallConv: return "conv";
  }
  return "?";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "linear") return Architecture::kLinearProbe;
  if (name == "mlp") return Architecture::kMlp;
  if (name == "conv") return Architecture::kSmallConv;
  throw std::invalid_argument("unknown architecture '" + std::string(name) + "' (linear|mlp|conv)");
}

void ModelSpec::validate() const {
  if (input_downsample == 0) throw std::invalid_argument("ModelSpec: input_downsample must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("ModelSpec: dropout must be in [0, 1)");
  if (arch == Architecture::kMlp && hidden_units == 0) throw std::invalid_argument("ModelSpec: hidden_units must be > 0");
  if (arch == Architecture::kSmallConv && (channels == 0 || kernel == 0)) {
    throw std::invalid_argument("ModelSpec: channels and kernel must be > 0");
  }
}

Model::Model(ModelSpec spec, std::size_t image_width, std::size_t image_height)
    : spec_(spec), image_width_(image_width), image_height_(image_height) {
  spec_.validate();
  input_width_ = image_width / spec_.input_downsample;
  input_height_ = image_height / spec_.input_downsample;
  if (input_width_ == 0 || input_height_ == 0) throw std::invalid_argument("Model: downsample exceeds image size");
  const std::size_t n = input_size();
  switch (spec_.arch) {
    case Architecture::kLinearProbe:
      params_.assign(n + 1, 0.0);
      break;
    case Architecture::kMlp:
      params_.assign(spec_.hidden_units * n + 2 * spec_.hidden_units + 1, 0.0);
      break;
    case Architecture::kSmallConv:
      if (spec_.kernel > input_width_ || spec_.kernel > input_height_) {
        throw std::invalid_argument("Model: conv kernel larger than input");
      }
      params_.assign(spec_.channels * spec_.kernel * spec_.kernel + 2 * spec_.channels + 1, 0.0);
      break;
  }
  initialize(spec_.init_seed);
}

std::size_t Model::dropout_width() const {
  switch (spec_.arch) {
    case Architecture::kLinearProbe: return input_size();
    case Architecture::kMlp: return spec_.hidden_units;
    case Architecture::kSmallConv: return spec_.channels;
  }
  return 0;
}

void Model::initialize(Seed seed) {
  std::fill(params_.begin(), params_.end(), 0.0);
  Engine eng = make_engine(seed);
  const std::size_t n = input_size();
  switch (spec_.arch) {
    case Architecture::kLinearProbe:
      break;
    case Architecture::kMlp: {
      const std::size_t h = spec_.hidden_units;
      for (std::size_t i = 0; i < h * n; ++i) params_[i] = glorot(eng, n, h);
      for (std::size_t j = 0; j < h; ++j) params_[h * n + h + j] = glorot(eng, h, 1);
      break;
    }
    case Architecture::kSmallConv: {
      const std::size_t c = spec_.channels, kk = spec_.kernel * spec_.kernel;
      for (std::size_t i = 0; i < c * kk; ++i) params_[i] = glorot(eng, kk, c);
      for (std::size_t j = 0; j < c; ++j) params_[c * kk + c + j] = glorot(eng, c, 1);
      break;
    }
  }
}

std::vector<double> Model::features(const Image& img) const {
  if (img.width() != image_width_ || img.height() != image_height_) {
    throw std::invalid_argument("Model: expected " + std::to_string(image_width_) + "x" +
                                std::to_string(image_height_) + " input, got " + std::to_string(img.width()) +
                                "x" + std::to_string(img.height()));
  }
  Image small = downsample(img, spec_.input_downsample);
  return std::move(small.data());
}

double Model::logit(std::span<const double> x, const std::vector<std::uint8_t>* keep) const {
  return logit_and_grad(x, keep, 0.0, {});
}

double Model::logit_and_grad(std::span<const double> x, const std::vector<std::uint8_t>* keep, double scale,
                             std::span<double> grad) const {
  const std::size_t n = input_size();
  if (x.size() != n) throw std::invalid_argument("Model: feature length mismatch");
  const bool want_grad = !grad.empty();
  const double inv_keep = keep ? 1.0 / (1.0 - spec_.dropout) : 1.0;
  auto kept = [&](std::size_t i) { return keep ? ((*keep)[i] ? inv_keep : 0.0) : 1.0; };
  const double* p = params_.data();

  switch (spec_.arch) {
    case Architecture::kLinearProbe: {
      double z = p[n];
      for (std::size_t i = 0; i < n; ++i) z += p[i] * x[i] * kept(i);
      if (want_grad) {
        for (std::size_t i = 0; i < n; ++i) grad[i] += scale * x[i] * kept(i);
        grad[n] += scale;
      }
      return z;
    }
    case Architecture::kMlp: {
      const std::size_t h = spec_.hidden_units;
      const double* w1 = p;
      const double* b1 = p + h * n;
      const double* w2 = b1 + h;
      const double b2 = w2[h];
      std::vector<double> act(h);
      double z = b2;
      for (std::size_t j = 0; j < h; ++j) {
        const double* row = w1 + j * n;
        double a = b1[j];
        for (std::size_t i = 0; i < n; ++i) a += row[i] * x[i];
        act[j] = std::tanh(a);
        z += w2[j] * act[j] * kept(j);
      }
      if (want_grad) {
        for (std::size_t j = 0; j < h; ++j) {
          const double da = scale * w2[j] * kept(j) * (1.0 - act[j] * act[j]);
          double* grow = grad.data() + j * n;
          for (std::size_t i = 0; i < n; ++i) grow[i] += da * x[i];
          grad[h * n + j] += da;
          grad[h * n + h + j] += scale * act[j] * kept(j);
        }
        grad[h * n + 2 * h] += scale;
      }
      return z;
    }
    case Architecture::kSmallConv: {
      const std::size_t c = spec_.channels, k = spec_.kernel;
      const std::size_t W = input_width_, H = input_height_;
      const std::size_t ow = W - k + 1, oh = H - k + 1;
      const double inv_pos = 1.0 / static_cast<double>(ow * oh);
      const double* kern = p;
      const double* bc = p + c * k * k;
      const double* w2 = bc + c;
      const double b2 = w2[c];
      double z = b2;
      std::vector<double> pre(ow * oh);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* kc = kern + ch * k * k;
        double pooled = 0.0;
        for (std::size_t r = 0; r < oh; ++r) {
          for (std::size_t col = 0; col < ow; ++col) {
            double a = bc[ch];
            for (std::size_t kr = 0; kr < k; ++kr)
              for (std::size_t kc2 = 0; kc2 < k; ++kc2) a += kc[kr * k + kc2] * x[(r + kr) * W + col + kc2];
            pre[r * ow + col] = a;
            pooled += softplus(a);
          }
        }
        pooled *= inv_pos;
        z += w2[ch] * pooled * kept(ch);
        if (want_grad) {
          const double dpool = scale * w2[ch] * kept(ch) * inv_pos;
          double* gk = grad.data() + ch * k * k;
          double gb = 0.0;
          for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t col = 0; col < ow; ++col) {
              const double da = dpool * sigmoid(pre[r * ow + col]);
              gb += da;
              for (std::size_t kr = 0; kr < k; ++kr)
                for (std::size_t kc2 = 0; kc2 < k; ++kc2) gk[kr * k + kc2] += da * x[(r + kr) * W + col + kc2];
            }
          }
          grad[c * k * k + ch] += gb;
          grad[c * k * k + c + ch] += scale * pooled * kept(ch);
        }
      }
      if (want_grad) grad[c * k * k + 2 * c] += scale;
      return z;
    }
  }
  return 0.0;
}

std::vector<double> predict_logits(const Model& model, std::span<const Image> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const Image& img : batch) out.push_back(model.logit(model.features(img)));
  return out;
}

std::vector<double> forward(const Model& model, std::span<const Image> batch) {
  auto out = predict_logits(model, batch);
  for (double& z : out) z = std::clamp(sigmoid(z), 1e-15, 1.0 - 1e-15);
  return out;
}

std::vector<std::uint8_t> dropout_mask(std::size_t width, double rate, Seed seed) {
  Engine eng = make_engine(seed);
  std::vector<std::uint8_t> keep(width);
  for (auto& k : keep) k = uniform(eng, 0.0, 1.0) >= rate ? 1 : 0;
  return keep;
}

LossGrad loss_and_grad_features(const Model& model, std::span<const std::vector<double>> features,
                                std::span<const int> labels, std::optional<Seed> dropout_seed) {
  if (features.size() != labels.size()) throw std::invalid_argument("loss_and_grad: batch/label size mismatch");
  if (features.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  LossGrad out{0.0, std::vector<double>(model.num_params(), 0.0)};
  const double inv_n = 1.0 / static_cast<double>(features.size());
  std::vector<double> dz(model.num_params());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) throw std::invalid_argument("loss_and_grad: labels must be 0 or 1");
    std::optional<std::vector<std::uint8_t>> keep;
    if (dropout_seed && model.spec().dropout > 0.0) {
      keep = dropout_mask(model.dropout_width(), model.spec().dropout, derive_seed(*dropout_seed, i));
    }
    std::fill(dz.begin(), dz.end(), 0.0);
    const double z = model.logit_and_grad(features[i], keep ? &*keep : nullptr, 1.0, dz);
    // softplus(z) - y z is the cross-entropy written on the logit.
    out.loss += (softplus(z) - y * z) * inv_n;
    const double g = (sigmoid(z) - y) * inv_n;
    for (std::size_t p = 0; p < dz.size(); ++p) out.grad[p] += g * dz[p];
  }
  return out;
}

LossGrad loss_and_grad(const Model& model, std::span<const Image> batch, std::span<const int> labels,
                       std::optional<Seed> dropout_seed) {
  std::vector<std::vector<double>> feats;
  feats.reserve(batch.size());
  for (const Image& img : batch) feats.push_back(model.features(img));
  return loss_and_grad_features(model, feats, labels, dropout_seed);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamParams& hyper) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (max_epochs == 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
  if (patience >= max_epochs) throw std::invalid_argument("TrainConfig: patience must be < max_epochs");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  augment_params.validate();
}

namespace {

struct ValStats {
  double loss = 0.0;
  double auc = 0.0;
};

ValStats evaluate(const Model& model, std::span<const std::vector<double>> feats, std::span<const int> labels,
                  bool need_auc) {
  ValStats s;
  std::vector<double> logits(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const double z = model.logit(feats[i]);
    logits[i] = z;
    s.loss += softplus(z) - labels[i] * z;
  }
  s.loss /= static_cast<double>(feats.size());
  s.auc = need_auc ? auc(logits, labels) : NAN;
  return s;
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const LabeledSet& train_set, const LabeledSet& val_set,
                   const TrainConfig& config, Seed seed) {
  config.validate();
  if (train_set.images.empty() || val_set.images.empty()) throw std::invalid_argument("train: empty train or val split");
  if (train_set.images.size() != train_set.labels.size() || val_set.images.size() != val_set.labels.size()) {
    throw std::invalid_argument("train: image/label count mismatch");
  }
  const Image& first = train_set.images.front();
  ModelSpec seeded = spec;
  seeded.init_seed = derive_seed(seed, "init") ^ spec.init_seed;
  Model model(seeded, first.width(), first.height());

  const std::size_t n = train_set.images.size();
  const auto n_pos = static_cast<std::size_t>(std::count(train_set.labels.begin(), train_set.labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  EarlyStopMetric metric = config.metric;
  if (metric == EarlyStopMetric::kAuto) {
    const bool balanced = static_cast<double>(n_pos > n_neg ? n_pos - n_neg : n_neg - n_pos) <= 0.1 * static_cast<double>(n);
    metric = balanced ? EarlyStopMetric::kValAuc : EarlyStopMetric::kValLoss;
  }
  const auto val_pos = std::count(val_set.labels.begin(), val_set.labels.end(), 1);
  const bool val_has_both = val_pos > 0 && static_cast<std::size_t>(val_pos) < val_set.labels.size();
  if (metric == EarlyStopMetric::kValAuc && !val_has_both) {
    throw std::invalid_argument("train: validation AUC needs both classes in the validation split");
  }

  std::vector<std::vector<double>> val_feats;
  for (const Image& img : val_set.images) val_feats.push_back(model.features(img));
  std::vector<std::vector<double>> base_feats;
  for (const Image& img : train_set.images) base_feats.push_back(model.features(img));

  const Seed shuffle_seed = derive_seed(seed, "shuffle");
  const Seed dropout_seed = derive_seed(seed, "dropout");
  const Seed augment_seed = derive_seed(seed, "augment");
  AdamState adam;
  const AdamParams hyper{config.learning_rate};

  TrainedModel result{model, {}, 0, 0, metric};
  double best = metric == EarlyStopMetric::kValAuc ? -INFINITY : INFINITY;
  std::size_t wait = 0;
  std::size_t step = 0;
  std::vector<std::size_t> order(n);
  std::vector<std::vector<double>> epoch_feats(n);
  std::vector<std::vector<double>> batch_feats;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) {
      if (config.augment) {
        const Seed s = derive_seed(augment_seed, epoch * n + i);
        epoch_feats[i] = model.features(random_affine(train_set.images[i], config.augment_params, s));
      } else {
        epoch_feats[i] = base_feats[i];
      }
    }
    std::iota(order.begin(), order.end(), 0);
    Engine shuffle_eng = make_engine(derive_seed(shuffle_seed, epoch));
    shuffle(order, shuffle_eng);

    double train_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batch_feats.clear();
      batch_labels.clear();
      for (std::size_t b = start; b < end; ++b) {
        batch_feats.push_back(epoch_feats[order[b]]);
        batch_labels.push_back(train_set.labels[order[b]]);
      }
      auto lg = loss_and_grad_features(model, batch_feats, batch_labels, derive_seed(dropout_seed, step++));
      train_loss += lg.loss * static_cast<double>(end - start);
      adam_step(model.params(), lg.grad, adam, hyper);
    }
    train_loss /= static_cast<double>(n);

    const ValStats vs = evaluate(model, val_feats, val_set.labels, val_has_both);
    result.history.push_back({train_loss, vs.loss, vs.auc});
    const double current = metric == EarlyStopMetric::kValAuc ? vs.auc : vs.loss;
    const bool improved = metric == EarlyStopMetric::kValAuc ? current > best : current < best;
    if (improved) {
      best = current;
      wait = 0;
      result.best_epoch = epoch;
      result.model = model;
    } else if (++wait >= config.patience) {
      break;
    }
  }
  result.epochs_trained = result.history.size();
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& trained) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  const Model& m = trained.model;
  const ModelSpec& s = m.spec();
  os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  binio::put_le<std::uint32_t>(os, kCheckpointVersion);
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.arch));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.image_width()));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.image_height()));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.input_downsample));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.hidden_units));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.channels));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.kernel));
  binio::put_le<double>(os, s.dropout);
  binio::put_le<std::uint64_t>(os, s.init_seed);
  binio::put_le<std::uint64_t>(os, m.num_params());
  for (double p : m.params()) binio::put_le<double>(os, p);
  if (!os) throw std::runtime_error("write failed: " + path.string());

  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : trained.history) {
    hist.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                    {"val_auc", std::isfinite(e.val_auc) ? nlohmann::json(e.val_auc) : nlohmann::json(nullptr)}});
  }
  nlohmann::json side = {{"epochs_trained", trained.epochs_trained},
                         {"best_epoch", trained.best_epoch},
                         {"metric", trained.metric == EarlyStopMetric::kValAuc ? "val_auc" : "val_loss"},
                         {"history", hist}};
  std::ofstream js(path.string() + ".history.json");
  js << side.dump(2) << '\n';
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::string ctx = path.string();
  binio::expect_magic(is, kCheckpointMagic, ctx);
  const auto version = binio::get_le<std::uint32_t>(is, ctx);
  if (version != kCheckpointVersion) throw std::runtime_error(ctx + ": unsupported checkpoint version " + std::to_string(version));
  ModelSpec s;
  const auto arch = binio::get_le<std::uint32_t>(is, ctx);
  if (arch > static_cast<std::uint32_t>(Architecture::kSmallConv)) throw std::runtime_error(ctx + ": bad architecture id");
  s.arch = static_cast<Architecture>(arch);
  const auto iw = binio::get_le<std::uint32_t>(is, ctx);
  const auto ih = binio::get_le<std::uint32_t>(is, ctx);
  s.input_downsample = binio::get_le<std::uint32_t>(is, ctx);
  s.hidden_units = binio::get_le<std::uint32_t>(is, ctx);
  s.channels = binio::get_le<std::uint32_t>(is, ctx);
  s.kernel = binio::get_le<std::uint32_t>(is, ctx);
  s.dropout = binio::get_le<double>(is, ctx);
  s.init_seed = binio::get_le<std::uint64_t>(is, ctx);
  const auto count = binio::get_le<std::uint64_t>(is, ctx);
  Model model(s, iw, ih);
  if (count != model.num_params()) throw std::runtime_error(ctx + ": parameter count does not match architecture");
  for (double& p : model.params()) p = binio::get_le<double>(is, ctx);

  TrainedModel out{model, {}, 0, 0, EarlyStopMetric::kValLoss};
  std::ifstream js(path.string() + ".history.json");
  if (js) {
    const auto side = nlohmann::json::parse(js);
    out.epochs_trained = side.at("epochs_trained").get<std::size_t>();
    out.best_epoch = side.at("best_epoch").get<std::size_t>();
    out.metric = side.at("metric").get<std::string>() == "val_auc" ? EarlyStopMetric::kValAuc : EarlyStopMetric::kValLoss;
    for (const auto& e : side.at("history")) {
      out.history.push_back({e.at("train_loss").get<double>(), e.at("val_loss").get<double>(),
                             e.at("val_auc").is_null() ? NAN : e.at("val_auc").get<double>()});
    }
  }
  return out;
}

}  // namespace confound

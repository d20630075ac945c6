#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "confound/learner.hpp"
#include "confound/stats.hpp"
#include "support.hpp"

namespace confound {
namespace {

ModelSpec spec_for(Architecture arch) {
  ModelSpec s;
  s.arch = arch;
  s.input_downsample = 2;
  s.hidden_units = 5;
  s.channels = 3;
  s.kernel = 3;
  s.dropout = 0.3;
  return s;
}

struct Batch {
  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
};

Batch random_batch(const Model& m, std::size_t n, std::uint64_t seed) {
  Batch b;
  std::mt19937_64 eng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    b.feats.push_back(m.features(test::random_image(m.image_width(), m.image_height(), eng())));
    b.labels.push_back(static_cast<int>(eng() % 2));
  }
  return b;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Central differences on the mean cross-entropy, the dropout masks held
// fixed by reusing the same dropout seed.
std::vector<double> numeric_grad(Model m, const Batch& b, std::optional<Seed> dropout, double eps) {
  std::vector<double> g(m.num_params());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double keep = m.params()[p];
    m.params()[p] = keep + eps;
    const double up = loss_and_grad_features(m, b.feats, b.labels, dropout).loss;
    m.params()[p] = keep - eps;
    const double down = loss_and_grad_features(m, b.feats, b.labels, dropout).loss;
    m.params()[p] = keep;
    g[p] = (up - down) / (2 * eps);
  }
  return g;
}

class GradientCheck : public ::testing::TestWithParam<Architecture> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  Model m(spec_for(GetParam()), 10, 12);
  std::mt19937_64 eng(99);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int draw = 0; draw < 20; ++draw) {
    for (double& p : m.params()) p = normal(eng);
    const Batch b = random_batch(m, 4, 1000 + static_cast<std::uint64_t>(draw));
    for (const std::optional<Seed> dropout : {std::optional<Seed>{}, std::optional<Seed>{static_cast<Seed>(draw)}}) {
      const LossGrad lg = loss_and_grad_features(m, b.feats, b.labels, dropout);
      const auto fd = numeric_grad(m, b, dropout, 1e-5);
      std::vector<double> diff(fd.size());
      for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = lg.grad[i] - fd[i];
      EXPECT_LT(norm(diff) / std::max(norm(fd), norm(lg.grad)), 1e-4) << "draw " << draw;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, GradientCheck,
                         ::testing::Values(Architecture::kLinearProbe, Architecture::kMlp, Architecture::kSmallConv));

TEST(Forward, ZeroProbeGivesOneHalf) {
  ModelSpec s;
  Model m(s, 8, 8);
  std::vector<Image> batch = {test::random_image(8, 8, 1, -5, 5), Image(8, 8, 100.0)};
  for (double p : forward(m, batch)) EXPECT_EQ(p, 0.5);
}

TEST(Forward, StrictlyInsideUnitInterval) {
  ModelSpec s;
  s.input_downsample = 1;
  Model m(s, 4, 4);
  for (double& p : m.params()) p = 1e3;
  std::vector<Image> batch = {Image(4, 4, 1.0), Image(4, 4, -1.0)};
  for (double p : forward(m, batch)) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Forward, MlpMatchesScalarOracle) {
  ModelSpec s;
  s.arch = Architecture::kMlp;
  s.hidden_units = 3;
  s.input_downsample = 1;
  Model m(s, 2, 1);
  const std::vector<double> w = {0.3, -0.7, 1.1, 0.2, -0.4, 0.9,  // W1 rows
                                 0.05, -0.1, 0.2,                 // b1
                                 0.8, -1.3, 0.6,                  // w2
                                 -0.25};                          // b2
  ASSERT_EQ(m.num_params(), w.size());
  m.params() = w;
  const Image img(2, 1, std::vector<double>{0.4, -0.6});
  const double x0 = 0.4, x1 = -0.6;
  const double h0 = std::tanh(0.3 * x0 - 0.7 * x1 + 0.05);
  const double h1 = std::tanh(1.1 * x0 + 0.2 * x1 - 0.1);
  const double h2 = std::tanh(-0.4 * x0 + 0.9 * x1 + 0.2);
  const double z = 0.8 * h0 - 1.3 * h1 + 0.6 * h2 - 0.25;
  EXPECT_NEAR(forward(m, std::vector<Image>{img})[0], 1 / (1 + std::exp(-z)), 1e-12);
}

TEST(Forward, ShapeMismatchThrows) {
  Model m(ModelSpec{}, 8, 8);
  EXPECT_THROW(forward(m, std::vector<Image>{Image(8, 6)}), std::invalid_argument);
  EXPECT_THROW((Model(ModelSpec{Architecture::kLinearProbe, 16}, 8, 8)), std::invalid_argument);
}

TEST(Forward, EvaluationIgnoresDropout) {
  Model m(spec_for(Architecture::kMlp), 8, 8);
  std::vector<Image> batch = {test::random_image(8, 8, 3)};
  EXPECT_EQ(forward(m, batch), forward(m, batch));
}

TEST(Loss, DuplicatedBatchIsUnchanged) {
  for (Architecture a : {Architecture::kLinearProbe, Architecture::kMlp, Architecture::kSmallConv}) {
    Model m(spec_for(a), 8, 8);
    const Batch b = random_batch(m, 5, 4);
    Batch twice = b;
    twice.feats.insert(twice.feats.end(), b.feats.begin(), b.feats.end());
    twice.labels.insert(twice.labels.end(), b.labels.begin(), b.labels.end());
    const LossGrad one = loss_and_grad_features(m, b.feats, b.labels);
    const LossGrad two = loss_and_grad_features(m, twice.feats, twice.labels);
    EXPECT_NEAR(one.loss, two.loss, 1e-14);
    for (std::size_t i = 0; i < one.grad.size(); ++i) EXPECT_NEAR(one.grad[i], two.grad[i], 1e-14);
  }
}

TEST(Loss, ConfidentCorrectPredictionsApproachZero) {
  ModelSpec s;
  s.input_downsample = 1;
  Model m(s, 1, 1);
  m.params() = {100.0, 0.0};
  const std::vector<std::vector<double>> feats = {{1.0}, {-1.0}};
  const std::vector<int> labels = {1, 0};
  EXPECT_LT(loss_and_grad_features(m, feats, labels).loss, 1e-40);
  EXPECT_THROW(loss_and_grad_features(m, feats, std::vector<int>{1, 2}), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p = {1.0, -2.0};
  AdamState st;
  adam_step(p, std::vector<double>{0.0, 0.0}, st, {});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  std::vector<double> p = {0.0, 0.0, 0.0};
  AdamState st;
  adam_step(p, std::vector<double>{3.0, -0.02, 1e-3}, st, {0.01});
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-7);
  EXPECT_NEAR(p[2], -0.01, 1e-6);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  std::vector<double> x = {1.0};
  AdamState st;
  std::size_t steps = 0;
  while (std::abs(x[0]) >= 1e-3 && steps < 10000) {
    adam_step(x, std::vector<double>{2 * x[0]}, st, {1e-2});
    ++steps;
  }
  EXPECT_LT(std::abs(x[0]), 1e-3);
  EXPECT_LE(steps, 10000u);
}

TEST(Adam, RejectsNonFiniteGradients) {
  std::vector<double> x = {1.0};
  AdamState st;
  EXPECT_THROW(adam_step(x, std::vector<double>{NAN}, st, {}), std::invalid_argument);
}

LabeledSet two_pixel_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    const double a = u(eng), b = u(eng);
    // Separable by the sign of pixel 0 - pixel 1, margin 0.1.
    const double gap = 0.1 + a;
    s.images.emplace_back(2, 1, std::vector<double>{y ? b + gap : b - gap, b});
    s.labels.push_back(y);
  }
  return s;
}

TrainConfig fast_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.max_epochs = 200;
  c.patience = 20;
  c.batch_size = 8;
  c.augment = false;
  return c;
}

ModelSpec pixel_probe() {
  ModelSpec s;
  s.input_downsample = 1;
  s.dropout = 0.0;
  return s;
}

TEST(Train, SeparableToySetReachesPerfectAuc) {
  const LabeledSet tr = two_pixel_set(64, 1), val = two_pixel_set(32, 2);
  TrainConfig c = fast_config();
  c.patience = 199;
  const TrainedModel t = train(pixel_probe(), tr, val, c, 7);
  EXPECT_EQ(auc(predict_logits(t.model, tr.images), tr.labels), 1.0);
}

TEST(Train, PatienceZeroStopsAtFirstStall) {
  const LabeledSet tr = two_pixel_set(64, 1), val = two_pixel_set(32, 2);
  TrainConfig c = fast_config();
  c.patience = 0;
  c.metric = EarlyStopMetric::kValAuc;
  const TrainedModel t = train(pixel_probe(), tr, val, c, 7);
  ASSERT_LT(t.epochs_trained, c.max_epochs);
  for (std::size_t e = 1; e + 1 < t.history.size(); ++e) EXPECT_GT(t.history[e].val_auc, t.history[e - 1].val_auc);
  EXPECT_LE(t.history.back().val_auc, t.history[t.history.size() - 2].val_auc);
}

TEST(Train, EarlyStoppingContracts) {
  ModelSpec s = spec_for(Architecture::kMlp);
  LabeledSet tr, val;
  for (std::size_t i = 0; i < 40; ++i) {
    tr.images.push_back(test::random_image(8, 8, i));
    tr.labels.push_back(static_cast<int>(i % 2));
    val.images.push_back(test::random_image(8, 8, 100 + i));
    val.labels.push_back(static_cast<int>(i % 3 == 0));
  }
  for (EarlyStopMetric metric : {EarlyStopMetric::kValLoss, EarlyStopMetric::kValAuc}) {
    TrainConfig c = fast_config();
    c.max_epochs = 60;
    c.patience = 5;
    c.metric = metric;
    const TrainedModel t = train(s, tr, val, c, 3);
    EXPECT_LE(t.epochs_trained, c.max_epochs);
    EXPECT_EQ(t.history.size(), t.epochs_trained);
    if (t.epochs_trained < c.max_epochs) EXPECT_EQ(t.epochs_trained, t.best_epoch + 1 + c.patience);
    const EpochRecord& best = t.history[t.best_epoch];
    const EpochRecord& last = t.history.back();
    if (metric == EarlyStopMetric::kValAuc) {
      EXPECT_GE(best.val_auc, last.val_auc);
    } else {
      EXPECT_LE(best.val_loss, last.val_loss);
    }
    const auto logits = predict_logits(t.model, val.images);
    double loss = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double p = 1 / (1 + std::exp(-logits[i]));
      loss -= val.labels[i] ? std::log(p) : std::log(1 - p);
    }
    EXPECT_NEAR(loss / static_cast<double>(logits.size()), best.val_loss, 1e-9);
  }
}

TEST(Train, BitwiseDeterministicPerSeed) {
  ModelSpec s = spec_for(Architecture::kSmallConv);
  LabeledSet tr, val;
  for (std::size_t i = 0; i < 24; ++i) {
    tr.images.push_back(test::random_image(12, 12, i));
    tr.labels.push_back(static_cast<int>(i % 2));
    val.images.push_back(test::random_image(12, 12, 50 + i));
    val.labels.push_back(static_cast<int>(i % 2));
  }
  TrainConfig c = fast_config();
  c.max_epochs = 8;
  c.patience = 7;
  c.augment = true;
  const TrainedModel a = train(s, tr, val, c, 11);
  const TrainedModel b = train(s, tr, val, c, 11);
  EXPECT_EQ(a.model.params(), b.model.params());
  const TrainedModel other = train(s, tr, val, c, 12);
  EXPECT_NE(a.model.params(), other.model.params());
}

TEST(Train, RejectsEmptyOrDegenerateSplits) {
  const LabeledSet tr = two_pixel_set(8, 1);
  LabeledSet one_class;
  one_class.images = {Image(2, 1), Image(2, 1)};
  one_class.labels = {1, 1};
  TrainConfig c = fast_config();
  c.metric = EarlyStopMetric::kValAuc;
  EXPECT_THROW(train(pixel_probe(), tr, LabeledSet{}, c, 1), std::invalid_argument);
  EXPECT_THROW(train(pixel_probe(), tr, one_class, c, 1), std::invalid_argument);
  c.patience = c.max_epochs;
  EXPECT_THROW(train(pixel_probe(), tr, tr, c, 1), std::invalid_argument);
}

TEST(Checkpoint, RoundTripsParametersAndHistory) {
  test::TempDir dir("ckpt");
  const LabeledSet tr = two_pixel_set(32, 1), val = two_pixel_set(16, 2);
  TrainConfig c = fast_config();
  c.max_epochs = 10;
  c.patience = 3;
  ModelSpec s = pixel_probe();
  s.arch = Architecture::kMlp;
  s.hidden_units = 4;
  const TrainedModel t = train(s, tr, val, c, 5);
  save_checkpoint(dir / "m.bin", t);
  EXPECT_EQ(test::slurp(dir / "m.bin").substr(0, 5), "CBMDL");
  const TrainedModel back = load_checkpoint(dir / "m.bin");
  EXPECT_EQ(back.model.params(), t.model.params());
  EXPECT_EQ(back.model.spec().arch, Architecture::kMlp);
  EXPECT_EQ(back.epochs_trained, t.epochs_trained);
  EXPECT_EQ(back.best_epoch, t.best_epoch);
  ASSERT_EQ(back.history.size(), t.history.size());
  EXPECT_EQ(back.history.back().val_loss, t.history.back().val_loss);
  EXPECT_EQ(predict_logits(back.model, val.images), predict_logits(t.model, val.images));
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), std::runtime_error);
}

}  // namespace
}  // namespace confound

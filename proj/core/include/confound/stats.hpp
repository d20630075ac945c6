#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "confound/rng.hpp"

namespace confound {

struct RocResult {
  double auc = 0.0;
  // Operating points from the highest threshold down; (fpr, tpr) starts at
  // (0, 0) and ends at (1, 1).
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
};

/// Exact tie-averaged Mann-Whitney AUC plus the ROC curve.
/// Throws std::invalid_argument unless both classes are present.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);
double auc(std::span<const double> scores, std::span<const int> labels);

struct ConfidenceInterval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Student-t interval over the given values (needs at least two).
ConfidenceInterval mean_ci(std::span<const double> values, double level = 0.95);

/// Two-sided label-permutation test on the difference of means, with
/// add-one smoothing: p = (1 + #{|d_perm| >= |d_obs|}) / (1 + n_perm).
double permutation_test(std::span<const double> group_a, std::span<const double> group_b,
                        std::size_t n_perm = 10000, Seed seed = kDefaultSeed);

struct EvalReport {
  std::vector<double> iid_aucs;
  std::vector<double> ood_aucs;
  ConfidenceInterval iid;
  ConfidenceInterval ood;
  double p_art = 0.0;
  std::string confounder_path;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Test scores of one fold on the identically-distributed and the
/// artifact-swapped test sets.
struct FoldScores {
  std::vector<double> iid_scores;
  std::vector<int> iid_labels;
  std::vector<double> ood_scores;
  std::vector<int> ood_labels;
};

/// One fold of a patient-disjoint k-fold partition (indices into the
/// record list handed to kfold_eval).
struct FoldSplit {
  std::size_t fold = 0;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
};

using FoldPipeline = std::function<FoldScores(const FoldSplit&)>;

}  // namespace confound

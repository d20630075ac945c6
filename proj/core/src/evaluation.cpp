#include "confound/evaluation.hpp"

#include <set>
#include <stdexcept>
#include <string>

#include "confound/curator.hpp"

namespace confound {

std::vector<FoldSplit> make_folds(std::span<const Record> records, std::size_t k, Seed seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  std::set<std::string> patients;
  for (const Record& r : records) patients.insert(r.patient_id);
  if (patients.size() < k) {
    throw std::invalid_argument("kfold: " + std::to_string(patients.size()) + " patients cannot fill " +
                                std::to_string(k) + " folds");
  }
  const std::vector<double> fractions(k, 1.0 / static_cast<double>(k));
  const auto groups = stratified_partition(records, fractions, seed);
  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) folds[f].fold = f;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (groups[i] == f ? folds[f].test : folds[f].dev).push_back(i);
    }
  }
  return folds;
}

EvalReport kfold_eval(std::span<const Record> records, std::size_t k, const FoldPipeline& pipeline, Seed seed) {
  EvalReport report;
  for (const FoldSplit& fold : make_folds(records, k, seed)) {
    const FoldScores scores = pipeline(fold);
    report.iid_aucs.push_back(auc(scores.iid_scores, scores.iid_labels));
    report.ood_aucs.push_back(auc(scores.ood_scores, scores.ood_labels));
  }
  report.iid = mean_ci(report.iid_aucs);
  report.ood = mean_ci(report.ood_aucs);
  return report;
}

}  // namespace confound

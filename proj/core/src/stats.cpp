#include "confound/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

namespace confound {
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: scores/labels size mismatch");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("roc_auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult roc;
  roc.thresholds.push_back(INFINITY);
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);

  // twice_u counts pairs (pos above neg) as 2 and ties as 1, so it stays an
  // exact integer.
  std::uint64_t twice_u = 0;
  std::uint64_t pos_seen = 0, neg_seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t tie_pos = 0, tie_neg = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]] == 1) {
        ++tie_pos;
      } else {
        ++tie_neg;
      }
    }
    // Negatives in this block sit below every positive seen so far and tie
    // with the positives in the block.
    twice_u += tie_neg * (2 * pos_seen + tie_pos);
    pos_seen += tie_pos;
    neg_seen += tie_neg;
    roc.thresholds.push_back(s);
    roc.tpr.push_back(static_cast<double>(pos_seen) / static_cast<double>(n_pos));
    roc.fpr.push_back(static_cast<double>(neg_seen) / static_cast<double>(n_neg));
  }
  const std::uint64_t twice_pairs = 2 * static_cast<std::uint64_t>(n_pos) * n_neg;
  // Divide the smaller side so AUC(y) + AUC(1 - y) == 1 holds in floating point.
  if (2 * twice_u <= twice_pairs) {
    roc.auc = static_cast<double>(twice_u) / static_cast<double>(twice_pairs);
  } else {
    roc.auc = 1.0 - static_cast<double>(twice_pairs - twice_u) / static_cast<double>(twice_pairs);
  }
  return roc;
}

double auc(std::span<const double> scores, std::span<const int> labels) { return roc_auc(scores, labels).auc; }

ConfidenceInterval mean_ci(std::span<const double> values, double level) {
  if (values.size() < 2) throw std::invalid_argument("mean_ci: need at least 2 values");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("mean_ci: level must be in (0, 1)");
  const auto k = static_cast<double>(values.size());
  const double m = std::accumulate(values.begin(), values.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (k - 1.0));
  const boost::math::students_t dist(k - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + 0.5 * level);
  const double half = t * sd / std::sqrt(k);
  return {m, m - half, m + half};
}

double permutation_test(std::span<const double> group_a, std::span<const double> group_b, std::size_t n_perm,
                        Seed seed) {
  if (group_a.empty() || group_b.empty()) throw std::invalid_argument("permutation_test: empty group");
  std::vector<double> pooled(group_a.begin(), group_a.end());
  pooled.insert(pooled.end(), group_b.begin(), group_b.end());
  const std::size_t na = group_a.size(), n = pooled.size();
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  auto diff = [&](const std::vector<double>& v) {
    const double sa = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(na), 0.0);
    return sa / static_cast<double>(na) - (total - sa) / static_cast<double>(n - na);
  };
  const double observed = std::abs(diff(pooled));
  // Permuted statistics equal to the observed one up to summation-order
  // rounding must count as ties.
  double scale = 0.0;
  for (double v : pooled) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * std::max(scale, 1.0);

  Engine eng = make_engine(seed);
  std::size_t extreme = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    // Partial Fisher-Yates: only the first na slots matter.
    for (std::size_t i = 0; i < na; ++i) std::swap(pooled[i], pooled[i + uniform_index(eng, n - i)]);
    if (std::abs(diff(pooled)) >= observed - tol) ++extreme;
  }
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + n_perm);
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"p_art", r.p_art},
          {"confounder_path", r.confounder_path},
          {"folds", r.iid_aucs.size()},
          {"iid_aucs", r.iid_aucs},
          {"ood_aucs", r.ood_aucs},
          {"iid", {{"mean", r.iid.mean}, {"ci_low", r.iid.low}, {"ci_high", r.iid.high}}},
          {"ood", {{"mean", r.ood.mean}, {"ci_low", r.ood.low}, {"ci_high", r.ood.high}}}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.p_art = j.at("p_art").get<double>();
  r.confounder_path = j.at("confounder_path").get<std::string>();
  r.iid_aucs = j.at("iid_aucs").get<std::vector<double>>();
  r.ood_aucs = j.at("ood_aucs").get<std::vector<double>>();
  const auto& iid = j.at("iid");
  r.iid = {iid.at("mean").get<double>(), iid.at("ci_low").get<double>(), iid.at("ci_high").get<double>()};
  const auto& ood = j.at("ood");
  r.ood = {ood.at("mean").get<double>(), ood.at("ci_low").get<double>(), ood.at("ci_high").get<double>()};
  return r;
}

}  // namespace confound

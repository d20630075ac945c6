#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "confound/confounder.hpp"
#include "confound/curator.hpp"
#include "confound/image.hpp"
#include "confound/learner.hpp"
#include "confound/phantom.hpp"
#include "confound/record.hpp"
#include "confound/stats.hpp"

namespace confound {

/// Where the records come from: the phantom generator or an existing
/// manifest.csv (with optional sibling metadata.csv).
struct DataSource {
  enum class Kind { kPhantom, kManifest };
  Kind kind = Kind::kPhantom;
  std::size_t phantom_count = 400;
  PhantomOptions phantom;
  std::filesystem::path manifest;
};

struct ExperimentConfig {
  DataSource source;
  ConfounderSpec confounder;
  std::vector<double> p_art_grid{0.0, 0.1, 0.2, 0.5, 0.8, 1.0};
  DatasetConfig dataset;
  ModelSpec model;
  TrainConfig train;
  std::size_t folds = 5;
  Seed seed = kDefaultSeed;
  std::filesystem::path output_dir = "results";

  void validate() const;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Missing keys keep their defaults. Relative manifest paths resolve
/// against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Records with their source images, resized to dataset.image_size.
struct Dataset {
  std::vector<Record> records;
  std::vector<Image> images;
};

Dataset load_dataset(const ExperimentConfig& config);

/// One confounded train/val/i.i.d./o.o.d. division. Items keep the source
/// record; output ids are unique across the four lists.
struct CuratedSets {
  std::vector<MaterializeItem> train;
  std::vector<MaterializeItem> val;
  std::vector<MaterializeItem> test_iid;
  std::vector<MaterializeItem> test_ood;
};

/// Splits `dev` into train/val (patient-stratified), flags dev and the
/// i.i.d. test copy at spec.p_art, and builds the o.o.d. copy with the
/// artifact on the opposite class. Gender is realised by sampling instead:
/// every (label, gender) cell is cut to the smallest cell's size, and the
/// o.o.d. copy uses the fully reversed association.
CuratedSets curate_sets(std::span<const Record> dev, std::span<const Record> test, const ConfounderSpec& spec,
                        const DatasetConfig& dataset, Seed seed);

/// curate_sets over a fresh stratified split of all records, flattened
/// with split names train, val, test_iid and test_ood.
std::vector<MaterializeItem> curate_benchmark(std::span<const Record> records, const ExperimentConfig& config,
                                              double p_art);

/// A failure inside the sweep, tagged with where it happened.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, double p_art, std::size_t fold, const std::string& what);
  const std::string& stage() const { return stage_; }
  double p_art() const { return p_art_; }
  std::size_t fold() const { return fold_; }

 private:
  std::string stage_;
  double p_art_;
  std::size_t fold_;
};

/// One fold of curate -> train -> score at the given p_art. The dev side
/// is split into train/val, confounded at p_art, and the model is scored on
/// an i.i.d. copy of the test side and on its artifact-swapped o.o.d. copy.
FoldScores run_fold(const Dataset& data, const FoldSplit& split, const ExperimentConfig& config, double p_art);

/// Replaces training in the sweep, e.g. with an oracle for testing.
using FoldRunner = std::function<FoldScores(const Dataset&, const FoldSplit&, const ExperimentConfig&, double)>;

/// Progress callback: (p_art, fold, iid_auc, ood_auc).
using SweepProgress = std::function<void(double, std::size_t, double, double)>;

/// k-fold evaluation at every grid point; folds are identical across the
/// grid. Failures surface as StageError.
std::vector<EvalReport> run_sweep(const ExperimentConfig& config, const Dataset& data, const FoldRunner& runner = run_fold,
                                  const SweepProgress& progress = {});

/// Header `p_art,fold,iid_auc,ood_auc`, one row per (p_art, fold).
std::string results_csv(std::span<const EvalReport> reports);
std::vector<EvalReport> reports_from_csv(const std::string& csv, const std::string& confounder_path = {});

/// Two stacked panels, o.o.d. AUC on top and i.i.d. AUC below, each with
/// mean and 95% CI against p_art.
std::string render_svg(std::span<const EvalReport> reports, const std::string& title);

/// results.csv, results.svg, reports.json and config.json under
/// config.output_dir.
void write_sweep_outputs(const ExperimentConfig& config, std::span<const EvalReport> reports);

}  // namespace confound

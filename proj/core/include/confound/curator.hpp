#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "confound/confounder.hpp"
#include "confound/record.hpp"
#include "confound/rng.hpp"

namespace confound {

/// image_id -> what to do with that image.
using Assignment = std::map<std::string, Treatment>;

enum class Split { kTrain, kVal, kTest };
std::string_view to_string(Split s);

struct DatasetConfig {
  std::size_t n_test = 83;
  std::size_t n_dev = 248;
  std::array<double, 2> train_val_fractions{0.9, 0.1};
  double pos_fraction = 0.3;
  std::size_t image_size = 512;
  std::size_t batch_size = 32;

  void validate() const;
  /// Overall train/val/test fractions implied by the counts.
  std::array<double, 3> split_fractions() const;

  static DatasetConfig nih_lung_mass();
  static DatasetConfig lidc_lung_mass();
  static DatasetConfig nih_atelectasis();
};

nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct SplitPlan {
  std::map<std::string, Split> assignments;
  std::array<double, 3> fractions{};
  bool stratify_by_patient = true;
};

/// Flags each target-class record independently with probability p_art.
/// Two-level noise flags both classes: target gets kPrimary, the other
/// kSecondary. Gender flags the records whose metadata says "Female".
/// The draw for a record depends only on (seed, image_id).
Assignment assign_confounders(std::span<const Record> records, const ConfounderSpec& spec, Seed seed);

/// Artifact on every record of the class opposite to the target, none on
/// the target class; two-level noise swaps its levels between classes.
Assignment build_ood_test(std::span<const Record> records, const ConfounderSpec& spec);

/// Patient-grouped, class-preserving partition into groups with the given
/// fractions. Returns the group index of every record (same order).
/// Greedy: patients in seeded random order, stable-sorted largest first,
/// each placed where its classes are most under target.
std::vector<std::size_t> stratified_partition(std::span<const Record> records, std::span<const double> fractions,
                                              Seed seed);

SplitPlan stratified_split(std::span<const Record> records, const DatasetConfig& config, Seed seed);

/// Selects n_pos positives of which round(p_art * n_pos) are Female and
/// n_neg negatives of which round((1 - p_art) * n_neg) are Female.
/// Throws with the deficit when a (label, gender) cell is too small.
std::vector<Record> sample_gender_confounded(std::span<const Record> records, double p_art, std::size_t n_pos,
                                             std::size_t n_neg, Seed seed);

struct ManifestRow {
  std::string image_id;
  std::string patient_id;
  Label label = Label::kNegative;
  bool confounded = false;
  std::string confounder_path;
  std::string split;
  std::string file;
};

/// Header: image_id,patient_id,label,confounded,confounder_path,split,file
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRow> rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Records from a manifest; `file` resolves against the manifest directory
/// and a sibling metadata.csv (image_id,key,value) fills metadata.
std::vector<Record> load_records(const std::filesystem::path& manifest_path);
void write_metadata(const std::filesystem::path& path, std::span<const Record> records);

struct MaterializeItem {
  Record record;
  Treatment treatment = Treatment::kNone;
  std::string split;
  std::string output_id;  // file stem and manifest image_id
};

/// Reads, resizes, treats and writes every item as a 16-bit PNG under
/// output_dir/images/, then writes output_dir/manifest.csv. The per-image
/// seed is derive_seed(seed, output_id). Errors name the offending file.
std::vector<ManifestRow> materialize_items(std::span<const MaterializeItem> items, const ConfounderSpec& spec,
                                           const std::filesystem::path& output_dir, Seed seed,
                                           std::size_t image_size);

std::vector<ManifestRow> materialize(std::span<const Record> records, const Assignment& assignments,
                                     const ConfounderSpec& spec, const std::filesystem::path& output_dir, Seed seed,
                                     std::size_t image_size);

}  // namespace confound

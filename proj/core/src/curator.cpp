#include "confound/curator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "confound/image_io.hpp"

namespace confound {
namespace {

constexpr std::string_view kManifestHeader = "image_id,patient_id,label,confounded,confounder_path,split,file";

bool is_female(const Record& r) {
  const auto it = r.metadata.find("gender");
  if (it == r.metadata.end()) return false;
  return it->second == "Female" || it->second == "F";
}

bool has_gender(const Record& r) {
  const auto it = r.metadata.find("gender");
  if (it == r.metadata.end()) return false;
  return it->second == "Female" || it->second == "F" || it->second == "Male" || it->second == "M";
}

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    throw std::invalid_argument(std::string("manifest: ") + what + " '" + s + "' contains a comma or newline");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

void DatasetConfig::validate() const {
  if (n_test == 0 || n_dev == 0) throw std::invalid_argument("DatasetConfig: counts must be positive");
  if (train_val_fractions[0] < 0 || train_val_fractions[1] < 0 ||
      std::abs(train_val_fractions[0] + train_val_fractions[1] - 1.0) > 1e-9) {
    throw std::invalid_argument("DatasetConfig: train/val fractions must be >= 0 and sum to 1");
  }
  if (!(pos_fraction > 0.0 && pos_fraction < 1.0)) throw std::invalid_argument("DatasetConfig: pos_fraction must be in (0, 1)");
  if (image_size == 0 || batch_size == 0) throw std::invalid_argument("DatasetConfig: image_size and batch_size must be positive");
}

std::array<double, 3> DatasetConfig::split_fractions() const {
  const double total = static_cast<double>(n_test + n_dev);
  const double dev = static_cast<double>(n_dev) / total;
  return {dev * train_val_fractions[0], dev * train_val_fractions[1], static_cast<double>(n_test) / total};
}

DatasetConfig DatasetConfig::nih_lung_mass() { return {83, 248, {0.9, 0.1}, 0.3, 512, 32}; }
DatasetConfig DatasetConfig::lidc_lung_mass() { return {1710, 500, {0.8, 0.2}, 0.5, 362, 32}; }
DatasetConfig DatasetConfig::nih_atelectasis() { return {400, 400, {0.85, 0.15}, 0.5, 256, 64}; }

nlohmann::json to_json(const DatasetConfig& c) {
  return {{"n_test", c.n_test},
          {"n_dev", c.n_dev},
          {"train_val_fractions", c.train_val_fractions},
          {"pos_fraction", c.pos_fraction},
          {"image_size", c.image_size},
          {"batch_size", c.batch_size}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  if (j.contains("preset")) {
    const auto p = j.at("preset").get<std::string>();
    if (p == "nih_lung_mass") {
      c = DatasetConfig::nih_lung_mass();
    } else if (p == "lidc_lung_mass") {
      c = DatasetConfig::lidc_lung_mass();
    } else if (p == "nih_atelectasis") {
      c = DatasetConfig::nih_atelectasis();
    } else {
      throw std::invalid_argument("unknown dataset preset '" + p + "'");
    }
  }
  c.n_test = j.value("n_test", c.n_test);
  c.n_dev = j.value("n_dev", c.n_dev);
  if (j.contains("train_val_fractions")) c.train_val_fractions = j.at("train_val_fractions").get<std::array<double, 2>>();
  c.pos_fraction = j.value("pos_fraction", c.pos_fraction);
  c.image_size = j.value("image_size", c.image_size);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.validate();
  return c;
}

Assignment assign_confounders(std::span<const Record> records, const ConfounderSpec& spec, Seed seed) {
  spec.validate();
  Assignment out;
  const bool two_level = std::holds_alternative<PoissonTwoLevelConfounder>(spec.kind);
  const bool gender = std::holds_alternative<GenderConfounder>(spec.kind);
  for (const Record& r : records) {
    Treatment t = Treatment::kNone;
    if (gender) {
      t = is_female(r) ? Treatment::kPrimary : Treatment::kNone;
    } else {
      const bool target = r.label == spec.target_class;
      if (target || two_level) {
        Engine eng = make_engine(derive_seed(seed, r.image_id));
        if (uniform(eng, 0.0, 1.0) < spec.p_art) t = target ? Treatment::kPrimary : Treatment::kSecondary;
      }
    }
    if (!out.emplace(r.image_id, t).second) {
      throw std::invalid_argument("assign_confounders: duplicate image_id '" + r.image_id + "'");
    }
  }
  return out;
}

Assignment build_ood_test(std::span<const Record> records, const ConfounderSpec& spec) {
  Assignment out;
  const bool two_level = std::holds_alternative<PoissonTwoLevelConfounder>(spec.kind);
  const bool gender = std::holds_alternative<GenderConfounder>(spec.kind);
  for (const Record& r : records) {
    Treatment t = Treatment::kNone;
    if (gender) {
      t = is_female(r) ? Treatment::kPrimary : Treatment::kNone;
    } else if (r.label != spec.target_class) {
      t = Treatment::kPrimary;
    } else if (two_level) {
      t = Treatment::kSecondary;
    }
    out.emplace(r.image_id, t);
  }
  return out;
}

std::vector<std::size_t> stratified_partition(std::span<const Record> records, std::span<const double> fractions,
                                              Seed seed) {
  if (fractions.empty()) throw std::invalid_argument("stratified_partition: no groups");
  const double fsum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (std::abs(fsum - 1.0) > 1e-9 || std::any_of(fractions.begin(), fractions.end(), [](double f) { return f < 0; })) {
    throw std::invalid_argument("stratified_partition: fractions must be >= 0 and sum to 1");
  }

  struct Patient {
    std::string id;
    std::vector<std::size_t> rows;
    std::array<std::size_t, 2> per_class{0, 0};
  };
  std::map<std::string, std::size_t> index;
  std::vector<Patient> patients;
  std::array<double, 2> class_total{0, 0};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.patient_id.empty()) throw std::invalid_argument("stratified_partition: record '" + r.image_id + "' has no patient_id");
    auto [it, fresh] = index.emplace(r.patient_id, patients.size());
    if (fresh) patients.push_back({r.patient_id, {}, {0, 0}});
    Patient& p = patients[it->second];
    p.rows.push_back(i);
    ++p.per_class[static_cast<std::size_t>(to_int(r.label))];
    class_total[static_cast<std::size_t>(to_int(r.label))] += 1.0;
  }
  // Sort by id first so the result does not depend on input order.
  std::sort(patients.begin(), patients.end(), [](const Patient& a, const Patient& b) { return a.id < b.id; });
  Engine eng = make_engine(derive_seed(seed, "patient-order"));
  shuffle(patients, eng);
  std::stable_sort(patients.begin(), patients.end(),
                   [](const Patient& a, const Patient& b) { return a.rows.size() > b.rows.size(); });

  const double total = class_total[0] + class_total[1];
  const double largest_share = *std::max_element(fractions.begin(), fractions.end()) * total;
  if (!patients.empty() && static_cast<double>(patients.front().rows.size()) > std::ceil(largest_share)) {
    throw std::invalid_argument("stratified_partition: patient '" + patients.front().id + "' holds " +
                                std::to_string(patients.front().rows.size()) +
                                " records, more than the largest split share of " + std::to_string(largest_share));
  }

  const std::size_t k = fractions.size();
  std::vector<std::array<double, 2>> need(k);
  for (std::size_t s = 0; s < k; ++s) need[s] = {fractions[s] * class_total[0], fractions[s] * class_total[1]};

  std::vector<std::size_t> group(records.size(), 0);
  for (const Patient& p : patients) {
    std::size_t best = 0;
    double best_score = -INFINITY, best_total = -INFINITY;
    for (std::size_t s = 0; s < k; ++s) {
      if (fractions[s] == 0.0) continue;
      const double score = static_cast<double>(p.per_class[0]) * need[s][0] + static_cast<double>(p.per_class[1]) * need[s][1];
      // Ties go to the group with the most room left across both classes.
      const double total_need = need[s][0] + need[s][1];
      if (score > best_score + 1e-12 || (score > best_score - 1e-12 && total_need > best_total + 1e-12)) {
        best_score = score;
        best_total = total_need;
        best = s;
      }
    }
    need[best][0] -= static_cast<double>(p.per_class[0]);
    need[best][1] -= static_cast<double>(p.per_class[1]);
    for (std::size_t row : p.rows) group[row] = best;
  }
  return group;
}

SplitPlan stratified_split(std::span<const Record> records, const DatasetConfig& config, Seed seed) {
  config.validate();
  SplitPlan plan;
  plan.fractions = config.split_fractions();
  const auto groups = stratified_partition(records, plan.fractions, seed);
  for (std::size_t i = 0; i < records.size(); ++i) {
    plan.assignments[records[i].image_id] = static_cast<Split>(groups[i]);
  }
  return plan;
}

std::vector<Record> sample_gender_confounded(std::span<const Record> records, double p_art, std::size_t n_pos,
                                             std::size_t n_neg, Seed seed) {
  if (!(p_art >= 0.0 && p_art <= 1.0)) throw std::invalid_argument("sample_gender_confounded: p_art must be in [0, 1]");
  const auto pos_female = static_cast<std::size_t>(std::llround(p_art * static_cast<double>(n_pos)));
  const auto neg_female = static_cast<std::size_t>(std::llround((1.0 - p_art) * static_cast<double>(n_neg)));
  struct Cell {
    Label label;
    bool female;
    std::size_t wanted;
    std::vector<std::size_t> candidates;
  };
  std::array<Cell, 4> cells = {{{Label::kPositive, true, pos_female, {}},
                                {Label::kPositive, false, n_pos - pos_female, {}},
                                {Label::kNegative, true, neg_female, {}},
                                {Label::kNegative, false, n_neg - neg_female, {}}}};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (!has_gender(r)) continue;
    for (Cell& c : cells)
      if (c.label == r.label && c.female == is_female(r)) c.candidates.push_back(i);
  }
  std::vector<std::size_t> chosen;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    Cell& c = cells[ci];
    if (c.candidates.size() < c.wanted) {
      throw std::invalid_argument("sample_gender_confounded: need " + std::to_string(c.wanted) + " " +
                                  std::string(to_string(c.label)) + (c.female ? " Female" : " Male") +
                                  " records, have " + std::to_string(c.candidates.size()) + " (deficit " +
                                  std::to_string(c.wanted - c.candidates.size()) + ")");
    }
    std::sort(c.candidates.begin(), c.candidates.end(),
              [&](std::size_t a, std::size_t b) { return records[a].image_id < records[b].image_id; });
    Engine eng = make_engine(derive_seed(seed, ci));
    shuffle(c.candidates, eng);
    chosen.insert(chosen.end(), c.candidates.begin(), c.candidates.begin() + static_cast<std::ptrdiff_t>(c.wanted));
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Record> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(records[i]);
  return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestRow> rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << kManifestHeader << '\n';
  for (const ManifestRow& r : rows) {
    check_field(r.image_id, "image_id");
    check_field(r.patient_id, "patient_id");
    check_field(r.confounder_path, "confounder_path");
    check_field(r.split, "split");
    check_field(r.file, "file");
    os << r.image_id << ',' << r.patient_id << ',' << to_string(r.label) << ',' << (r.confounded ? 1 : 0) << ','
       << r.confounder_path << ',' << r.split << ',' << r.file << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader) {
    throw std::runtime_error(path.string() + ": missing or unexpected manifest header");
  }
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    rows.push_back({f[0], f[1], parse_label(f[2]), f[3] == "1", f[4], f[5], f[6]});
  }
  return rows;
}

void write_metadata(const std::filesystem::path& path, std::span<const Record> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "image_id,key,value\n";
  for (const Record& r : records) {
    for (const auto& [k, v] : r.metadata) {
      check_field(k, "metadata key");
      check_field(v, "metadata value");
      os << r.image_id << ',' << k << ',' << v << '\n';
    }
  }
}

std::vector<Record> load_records(const std::filesystem::path& manifest_path) {
  const auto rows = read_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  std::vector<Record> records;
  std::map<std::string, std::size_t> by_id;
  for (const auto& row : rows) {
    Record r{row.image_id, row.patient_id, row.label, {}, (dir / row.file).string()};
    if (!by_id.emplace(r.image_id, records.size()).second) {
      throw std::runtime_error(manifest_path.string() + ": duplicate image_id '" + r.image_id + "'");
    }
    records.push_back(std::move(r));
  }
  std::ifstream meta(dir / "metadata.csv", std::ios::binary);
  if (meta) {
    std::string line;
    std::getline(meta, line);
    while (std::getline(meta, line)) {
      const auto f = split_csv_line(line);
      if (f.size() != 3) continue;
      const auto it = by_id.find(f[0]);
      if (it != by_id.end()) records[it->second].metadata[f[1]] = f[2];
    }
  }
  return records;
}

std::vector<ManifestRow> materialize_items(std::span<const MaterializeItem> items, const ConfounderSpec& spec,
                                           const std::filesystem::path& output_dir, Seed seed,
                                           std::size_t image_size) {
  const std::string path_str = classify(spec).str();
  std::filesystem::create_directories(output_dir / "images");
  std::vector<ManifestRow> rows;
  std::vector<Record> out_records;
  rows.reserve(items.size());
  for (const MaterializeItem& item : items) {
    const std::string rel = "images/" + item.output_id + ".png";
    Image img;
    try {
      img = read_image(item.record.source_path);
    } catch (const std::exception& e) {
      throw std::runtime_error("materialize: reading " + item.record.source_path + ": " + e.what());
    }
    if (image_size != 0) img = resize(img, image_size, image_size);
    const Image treated = apply_treatment(img, spec, item.treatment, derive_seed(seed, item.output_id));
    try {
      write_png16(output_dir / rel, treated);
    } catch (const std::exception& e) {
      throw std::runtime_error("materialize: writing " + (output_dir / rel).string() + ": " + e.what());
    }
    rows.push_back({item.output_id, item.record.patient_id, item.record.label, item.treatment != Treatment::kNone,
                    path_str, item.split, rel});
    Record r = item.record;
    r.image_id = item.output_id;
    out_records.push_back(std::move(r));
  }
  write_manifest(output_dir / "manifest.csv", rows);
  write_metadata(output_dir / "metadata.csv", out_records);
  return rows;
}

std::vector<ManifestRow> materialize(std::span<const Record> records, const Assignment& assignments,
                                     const ConfounderSpec& spec, const std::filesystem::path& output_dir, Seed seed,
                                     std::size_t image_size) {
  std::vector<MaterializeItem> items;
  items.reserve(records.size());
  for (const Record& r : records) {
    const auto it = assignments.find(r.image_id);
    items.push_back({r, it == assignments.end() ? Treatment::kNone : it->second, "", r.image_id});
  }
  return materialize_items(items, spec, output_dir, seed, image_size);
}

}  // namespace confound

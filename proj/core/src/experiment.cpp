#include "confound/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "confound/evaluation.hpp"
#include "confound/image_io.hpp"

namespace confound {
namespace {

using nlohmann::json;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string_view metric_name(EarlyStopMetric m) {
  switch (m) {
    case EarlyStopMetric::kValLoss:
      return "val_loss";
    case EarlyStopMetric::kValAuc:
      return "val_auc";
    default:
      return "auto";
  }
}

EarlyStopMetric parse_metric(const std::string& s) {
  if (s == "auto") return EarlyStopMetric::kAuto;
  if (s == "val_loss") return EarlyStopMetric::kValLoss;
  if (s == "val_auc") return EarlyStopMetric::kValAuc;
  throw std::invalid_argument("unknown early-stop metric '" + s + "'");
}

template <class F>
auto in_stage(const char* name, double p_art, std::size_t fold, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, p_art, fold, e.what());
  }
}

std::vector<Record> pick(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<Record> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.records[i]);
  return out;
}

std::size_t smallest_gender_cell(std::span<const Record> records) {
  std::map<std::pair<Label, bool>, std::size_t> cells;
  for (const Record& r : records) {
    const auto it = r.metadata.find("gender");
    ++cells[{r.label, it != r.metadata.end() && it->second == "Female"}];
  }
  std::size_t n = SIZE_MAX;
  for (Label l : {Label::kNegative, Label::kPositive}) {
    for (bool f : {false, true}) n = std::min(n, cells[{l, f}]);
  }
  return n;
}

// Female share among positives that puts the gender artifact at p on the
// target class.
double female_share(const ConfounderSpec& spec, double p) {
  return spec.target_class == Label::kPositive ? p : 1.0 - p;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (p_art_grid.empty()) throw std::invalid_argument("ExperimentConfig: p_art grid is empty");
  for (double p : p_art_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ExperimentConfig: grid value " + fmt("%g", p) + " outside [0, 1]");
  }
  if (folds < 2) throw std::invalid_argument("ExperimentConfig: folds must be >= 2");
  if (source.kind == DataSource::Kind::kManifest && !std::filesystem::exists(source.manifest)) {
    throw std::invalid_argument("ExperimentConfig: manifest " + source.manifest.string() + " does not exist");
  }
  if (source.kind == DataSource::Kind::kPhantom && source.phantom_count < 2) {
    throw std::invalid_argument("ExperimentConfig: phantom count must be >= 2");
  }
  confounder.validate();
  dataset.validate();
  model.validate();
  train.validate();
}

json to_json(const ModelSpec& s) {
  return {{"arch", std::string(to_string(s.arch))},
          {"input_downsample", s.input_downsample},
          {"hidden_units", s.hidden_units},
          {"channels", s.channels},
          {"kernel", s.kernel},
          {"dropout", s.dropout},
          {"init_seed", s.init_seed}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  if (j.contains("arch")) s.arch = parse_architecture(j.at("arch").get<std::string>());
  s.input_downsample = j.value("input_downsample", s.input_downsample);
  s.hidden_units = j.value("hidden_units", s.hidden_units);
  s.channels = j.value("channels", s.channels);
  s.kernel = j.value("kernel", s.kernel);
  s.dropout = j.value("dropout", s.dropout);
  s.init_seed = j.value("init_seed", s.init_seed);
  s.validate();
  return s;
}

json to_json(const TrainConfig& c) {
  const AugmentParams& a = c.augment_params;
  return {{"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"batch_size", c.batch_size},
          {"metric", std::string(metric_name(c.metric))},
          {"augment", c.augment},
          {"augment_params",
           {{"rotation_deg", a.max_rotation_deg},
            {"width_shift", a.width_shift},
            {"height_shift", a.height_shift},
            {"shear", a.shear},
            {"zoom", a.zoom}}}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("metric")) c.metric = parse_metric(j.at("metric").get<std::string>());
  c.augment = j.value("augment", c.augment);
  if (j.contains("augment_params")) {
    const json& a = j.at("augment_params");
    AugmentParams& p = c.augment_params;
    p.max_rotation_deg = a.value("rotation_deg", p.max_rotation_deg);
    p.width_shift = a.value("width_shift", p.width_shift);
    p.height_shift = a.value("height_shift", p.height_shift);
    p.shear = a.value("shear", p.shear);
    p.zoom = a.value("zoom", p.zoom);
  }
  c.validate();
  return c;
}

ExperimentConfig experiment_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("dataset")) c.dataset = dataset_config_from_json(j.at("dataset"));
  if (j.contains("source")) {
    const json& s = j.at("source");
    const auto kind = s.value("kind", std::string("phantom"));
    if (kind == "phantom") {
      c.source.kind = DataSource::Kind::kPhantom;
      c.source.phantom_count = s.value("count", c.source.phantom_count);
      PhantomOptions& p = c.source.phantom;
      p.images_per_patient = s.value("images_per_patient", p.images_per_patient);
      p.texture_amplitude = s.value("texture_amplitude", p.texture_amplitude);
      p.noise_sigma = s.value("noise_sigma", p.noise_sigma);
      if (s.contains("seed")) p.seed = s.at("seed").get<Seed>();
    } else if (kind == "manifest") {
      c.source.kind = DataSource::Kind::kManifest;
      std::filesystem::path m = s.at("path").get<std::string>();
      c.source.manifest = m.is_relative() && !base_dir.empty() ? base_dir / m : m;
    } else {
      throw std::invalid_argument("unknown source kind '" + kind + "'");
    }
  }
  if (j.contains("confounder")) c.confounder = confounder_from_json(j.at("confounder"));
  if (j.contains("p_art_grid")) c.p_art_grid = j.at("p_art_grid").get<std::vector<double>>();
  if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  c.folds = j.value("folds", c.folds);
  if (j.contains("output_dir")) {
    std::filesystem::path out = j.at("output_dir").get<std::string>();
    c.output_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json source;
  if (c.source.kind == DataSource::Kind::kPhantom) {
    const PhantomOptions& p = c.source.phantom;
    source = {{"kind", "phantom"},
              {"count", c.source.phantom_count},
              {"images_per_patient", p.images_per_patient},
              {"texture_amplitude", p.texture_amplitude},
              {"noise_sigma", p.noise_sigma},
              {"seed", p.seed}};
  } else {
    source = {{"kind", "manifest"}, {"path", c.source.manifest.string()}};
  }
  return {{"source", source},
          {"confounder", to_json(c.confounder)},
          {"p_art_grid", c.p_art_grid},
          {"dataset", to_json(c.dataset)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"folds", c.folds},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()}};
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

Dataset load_dataset(const ExperimentConfig& config) {
  const std::size_t side = config.dataset.image_size;
  if (config.source.kind == DataSource::Kind::kPhantom) {
    PhantomOptions opts = config.source.phantom;
    opts.size = side;
    opts.pos_fraction = config.dataset.pos_fraction;
    PhantomSet set = generate_phantoms(config.source.phantom_count, opts);
    return {std::move(set.records), std::move(set.images)};
  }
  Dataset data;
  data.records = load_records(config.source.manifest);
  data.images.reserve(data.records.size());
  for (const Record& r : data.records) {
    Image img = read_image(r.source_path);
    if (img.width() != side || img.height() != side) img = resize(img, side, side);
    data.images.push_back(std::move(img));
  }
  return data;
}

StageError::StageError(std::string stage, double p_art, std::size_t fold, const std::string& what)
    : std::runtime_error("stage '" + stage + "' failed (p_art " + fmt("%g", p_art) + ", fold " + std::to_string(fold) +
                         "): " + what),
      stage_(std::move(stage)),
      p_art_(p_art),
      fold_(fold) {}

CuratedSets curate_sets(std::span<const Record> dev_in, std::span<const Record> test, const ConfounderSpec& spec,
                        const DatasetConfig& dataset, Seed seed) {
  std::vector<Record> dev(dev_in.begin(), dev_in.end());
  std::vector<Record> iid(test.begin(), test.end());
  std::vector<Record> ood = iid;
  Assignment dev_assign, iid_assign, ood_assign;
  if (std::holds_alternative<GenderConfounder>(spec.kind)) {
    const std::size_t n_dev = smallest_gender_cell(dev);
    const std::size_t n_test = smallest_gender_cell(test);
    dev = sample_gender_confounded(dev_in, female_share(spec, spec.p_art), n_dev, n_dev, derive_seed(seed, "gender-dev"));
    iid = sample_gender_confounded(test, female_share(spec, spec.p_art), n_test, n_test, derive_seed(seed, "gender-iid"));
    ood = sample_gender_confounded(test, female_share(spec, 0.0), n_test, n_test, derive_seed(seed, "gender-ood"));
  } else {
    dev_assign = assign_confounders(dev, spec, derive_seed(seed, "assign-dev"));
    iid_assign = assign_confounders(iid, spec, derive_seed(seed, "assign-test"));
    ood_assign = build_ood_test(ood, spec);
  }
  const auto item = [](const Assignment& a, const Record& r, const char* split, const std::string& id) {
    const auto it = a.find(r.image_id);
    return MaterializeItem{r, it == a.end() ? Treatment::kNone : it->second, split, id};
  };
  CuratedSets out;
  const auto groups = stratified_partition(dev, dataset.train_val_fractions, derive_seed(seed, "train-val"));
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (groups[i] == 0) {
      out.train.push_back(item(dev_assign, dev[i], "train", dev[i].image_id));
    } else {
      out.val.push_back(item(dev_assign, dev[i], "val", dev[i].image_id));
    }
  }
  for (const Record& r : iid) out.test_iid.push_back(item(iid_assign, r, "test_iid", r.image_id + "_iid"));
  for (const Record& r : ood) out.test_ood.push_back(item(ood_assign, r, "test_ood", r.image_id + "_ood"));
  return out;
}

std::vector<MaterializeItem> curate_benchmark(std::span<const Record> records, const ExperimentConfig& config,
                                              double p_art) {
  ConfounderSpec spec = config.confounder;
  spec.p_art = p_art;
  spec.validate();
  const std::array<double, 2> fractions = {1.0 - config.dataset.split_fractions()[2],
                                           config.dataset.split_fractions()[2]};
  const auto groups = stratified_partition(records, fractions, derive_seed(config.seed, "split"));
  std::vector<Record> dev, test;
  for (std::size_t i = 0; i < records.size(); ++i) (groups[i] == 0 ? dev : test).push_back(records[i]);
  CuratedSets sets = curate_sets(dev, test, spec, config.dataset, derive_seed(config.seed, "curate"));
  std::vector<MaterializeItem> all;
  for (auto* part : {&sets.train, &sets.val, &sets.test_iid, &sets.test_ood}) {
    all.insert(all.end(), std::make_move_iterator(part->begin()), std::make_move_iterator(part->end()));
  }
  return all;
}

FoldScores run_fold(const Dataset& data, const FoldSplit& split, const ExperimentConfig& config, double p_art) {
  ConfounderSpec spec = config.confounder;
  spec.p_art = p_art;
  const Seed fold_seed = derive_seed(derive_seed(config.seed, "fold"), split.fold);

  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < data.records.size(); ++i) index_of.emplace(data.records[i].image_id, i);

  const CuratedSets curated = in_stage("curate", p_art, split.fold, [&] {
    return curate_sets(pick(data, split.dev), pick(data, split.test), spec, config.dataset, fold_seed);
  });

  const auto materialize = [&](const std::vector<MaterializeItem>& items) {
    LabeledSet set;
    for (const MaterializeItem& it : items) {
      const std::size_t idx = index_of.at(it.record.image_id);
      const Seed s = derive_seed(fold_seed, it.output_id);
      set.images.push_back(apply_treatment(data.images[idx], spec, it.treatment, s));
      set.labels.push_back(to_int(it.record.label));
    }
    return set;
  };
  const auto sets = in_stage("inject", p_art, split.fold, [&] {
    return std::array<LabeledSet, 4>{materialize(curated.train), materialize(curated.val),
                                     materialize(curated.test_iid), materialize(curated.test_ood)};
  });

  TrainConfig tc = config.train;
  tc.batch_size = config.dataset.batch_size;
  const TrainedModel trained = in_stage(
      "train", p_art, split.fold, [&] { return train(config.model, sets[0], sets[1], tc, derive_seed(fold_seed, "train")); });

  return in_stage("score", p_art, split.fold, [&] {
    return FoldScores{predict_logits(trained.model, sets[2].images), sets[2].labels,
                      predict_logits(trained.model, sets[3].images), sets[3].labels};
  });
}

std::vector<EvalReport> run_sweep(const ExperimentConfig& config, const Dataset& data, const FoldRunner& runner,
                                  const SweepProgress& progress) {
  config.validate();
  const std::string path = classify(config.confounder).str();
  const auto folds = in_stage("partition", config.p_art_grid.front(), 0,
                              [&] { return make_folds(data.records, config.folds, derive_seed(config.seed, "folds")); });
  std::vector<EvalReport> reports;
  for (double p : config.p_art_grid) {
    EvalReport report;
    report.p_art = p;
    report.confounder_path = path;
    for (const FoldSplit& fold : folds) {
      const FoldScores scores = in_stage("fold", p, fold.fold, [&] { return runner(data, fold, config, p); });
      const auto [iid, ood] = in_stage("evaluate", p, fold.fold, [&] {
        return std::pair{auc(scores.iid_scores, scores.iid_labels), auc(scores.ood_scores, scores.ood_labels)};
      });
      report.iid_aucs.push_back(iid);
      report.ood_aucs.push_back(ood);
      if (progress) progress(p, fold.fold, iid, ood);
    }
    report.iid = mean_ci(report.iid_aucs);
    report.ood = mean_ci(report.ood_aucs);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::string results_csv(std::span<const EvalReport> reports) {
  std::string out = "p_art,fold,iid_auc,ood_auc\n";
  char buf[128];
  for (const EvalReport& r : reports) {
    for (std::size_t f = 0; f < r.iid_aucs.size(); ++f) {
      std::snprintf(buf, sizeof buf, "%g,%zu,%.6f,%.6f\n", r.p_art, f, r.iid_aucs[f], r.ood_aucs[f]);
      out += buf;
    }
  }
  return out;
}

std::vector<EvalReport> reports_from_csv(const std::string& csv, const std::string& confounder_path) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "p_art,fold,iid_auc,ood_auc") throw std::runtime_error("results csv: unexpected header '" + line + "'");
  std::vector<EvalReport> reports;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double p = 0, iid = 0, ood = 0;
    std::size_t fold = 0;
    if (std::sscanf(line.c_str(), "%lf,%zu,%lf,%lf", &p, &fold, &iid, &ood) != 4) {
      throw std::runtime_error("results csv line " + std::to_string(lineno) + ": malformed row");
    }
    if (reports.empty() || reports.back().p_art != p) {
      reports.push_back({});
      reports.back().p_art = p;
      reports.back().confounder_path = confounder_path;
    }
    reports.back().iid_aucs.push_back(iid);
    reports.back().ood_aucs.push_back(ood);
  }
  for (EvalReport& r : reports) {
    r.iid = mean_ci(r.iid_aucs);
    r.ood = mean_ci(r.ood_aucs);
  }
  return reports;
}

std::string render_svg(std::span<const EvalReport> reports, const std::string& title) {
  constexpr double kW = 480, kPanelH = 200, kLeft = 64, kRight = 24, kTop = 40, kGap = 56;
  const double plot_w = kW - kLeft - kRight;
  const double total_h = kTop + 2 * kPanelH + kGap + 48;
  std::ostringstream s;
  const auto f = [](double v) { return fmt("%.2f", v); };
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(kW) << "\" height=\"" << f(total_h)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << f(kW / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(title)
    << "</text>\n";

  struct Panel {
    const char* label;
    bool ood;
    const char* color;
  };
  const Panel panels[2] = {{"o.o.d. AUC", true, "#c0392b"}, {"i.i.d. AUC", false, "#2471a3"}};
  for (int k = 0; k < 2; ++k) {
    const double top = kTop + k * (kPanelH + kGap);
    const auto px = [&](double p) { return kLeft + p * plot_w; };
    const auto py = [&](double a) { return top + (1.0 - std::clamp(a, 0.0, 1.0)) * kPanelH; };
    s << "<g>\n";
    s << "<rect x=\"" << f(kLeft) << "\" y=\"" << f(top) << "\" width=\"" << f(plot_w) << "\" height=\"" << f(kPanelH)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = t * 0.25;
      s << "<line x1=\"" << f(kLeft) << "\" y1=\"" << f(py(v)) << "\" x2=\"" << f(kLeft + plot_w) << "\" y2=\""
        << f(py(v)) << "\" stroke=\"#dddddd\"/>\n";
      s << "<text x=\"" << f(kLeft - 6) << "\" y=\"" << f(py(v) + 4) << "\" text-anchor=\"end\">" << fmt("%.2f", v)
        << "</text>\n";
      s << "<text x=\"" << f(px(v)) << "\" y=\"" << f(top + kPanelH + 16) << "\" text-anchor=\"middle\">"
        << fmt("%.2f", v) << "</text>\n";
    }
    s << "<text x=\"16\" y=\"" << f(top + kPanelH / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << f(top + kPanelH / 2) << ")\">" << panels[k].label << "</text>\n";
    s << "<text x=\"" << f(kLeft + plot_w / 2) << "\" y=\"" << f(top + kPanelH + 32)
      << "\" text-anchor=\"middle\">p_art</text>\n";

    std::string points;
    for (const EvalReport& r : reports) {
      const ConfidenceInterval& ci = panels[k].ood ? r.ood : r.iid;
      const double x = px(r.p_art);
      if (!points.empty()) points += ' ';
      points += f(x) + "," + f(py(ci.mean));
      s << "<line x1=\"" << f(x) << "\" y1=\"" << f(py(ci.low)) << "\" x2=\"" << f(x) << "\" y2=\"" << f(py(ci.high))
        << "\" stroke=\"" << panels[k].color << "\"/>\n";
      for (double a : {ci.low, ci.high}) {
        s << "<line x1=\"" << f(x - 4) << "\" y1=\"" << f(py(a)) << "\" x2=\"" << f(x + 4) << "\" y2=\"" << f(py(a))
          << "\" stroke=\"" << panels[k].color << "\"/>\n";
      }
    }
    s << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << panels[k].color
      << "\" stroke-width=\"1.5\"/>\n";
    for (const EvalReport& r : reports) {
      const ConfidenceInterval& ci = panels[k].ood ? r.ood : r.iid;
      s << "<circle cx=\"" << f(px(r.p_art)) << "\" cy=\"" << f(py(ci.mean)) << "\" r=\"3\" fill=\"" << panels[k].color
        << "\"/>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_sweep_outputs(const ExperimentConfig& config, std::span<const EvalReport> reports) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  };
  write("results.csv", results_csv(reports));
  const std::string title = reports.empty() ? std::string("sweep") : reports.front().confounder_path;
  write("results.svg", render_svg(reports, title));
  json arr = json::array();
  for (const EvalReport& r : reports) arr.push_back(to_json(r));
  write("reports.json", arr.dump(2) + "\n");
  write("config.json", to_json(config).dump(2) + "\n");
}

}  // namespace confound

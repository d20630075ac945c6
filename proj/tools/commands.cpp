#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "confound/confounder.hpp"
#include "confound/curator.hpp"
#include "confound/evaluation.hpp"
#include "confound/experiment.hpp"
#include "confound/image_io.hpp"
#include "confound/learner.hpp"
#include "confound/phantom.hpp"
#include "confound/stats.hpp"

namespace confound::cli {
namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_flag) {
  ExperimentConfig c = load_experiment_config(path);
  c.seed = resolve_seed(seed_flag, c.seed);
  return c;
}

std::pair<std::size_t, std::size_t> parse_anchor(const std::string& s) {
  std::size_t r = 0, c = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%zu,%zu%c", &r, &c, &tail) != 2) {
    throw std::invalid_argument("--anchor expects ROW,COL, got '" + s + "'");
  }
  return {r, c};
}

struct ScoredSplit {
  std::vector<double> scores;
  std::vector<int> labels;
};

}  // namespace

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config_value) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CONFOUND_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw std::invalid_argument(std::string("CONFOUND_SEED is not an integer: '") + env + "'");
    return v;
  }
  return config_value.value_or(kDefaultSeed);
}

int run_inject(const InjectOptions& o) {
  ConfounderSpec spec;
  if (o.confounder_file) {
    spec = confounder_from_json(read_json(*o.confounder_file));
  } else {
    json j = {{"kind", o.kind}};
    if (o.d0) j["d0"] = *o.d0;
    if (o.n0) j["n0"] = *o.n0;
    if (o.a_max) j["a_max"] = *o.a_max;
    if (o.angles) j["angles"] = *o.angles;
    if (o.anchor) {
      const auto [r, c] = parse_anchor(*o.anchor);
      j["anchor"] = {r, c};
    }
    if (o.scale) j["scale"] = *o.scale;
    if (o.text) j["text"] = *o.text;
    if (o.intensity) j["intensity"] = *o.intensity;
    spec = confounder_from_json(j);
  }
  const Image in = read_image(o.input);
  const Image out = apply_treatment(in, spec, Treatment::kPrimary, resolve_seed(o.seed));
  write_image(o.output, out);
  std::cout << classify(spec).str() << "\n";
  return 0;
}

int run_phantom(const PhantomCmdOptions& o) {
  PhantomOptions opts;
  std::size_t count = 400;
  std::optional<std::uint64_t> config_seed;
  if (o.config) {
    const ExperimentConfig c = load_experiment_config(*o.config);
    opts = c.source.phantom;
    opts.size = c.dataset.image_size;
    opts.pos_fraction = c.dataset.pos_fraction;
    count = c.source.phantom_count;
    config_seed = opts.seed;
  }
  if (o.count) count = *o.count;
  if (o.pos_fraction) opts.pos_fraction = *o.pos_fraction;
  if (o.size) opts.size = *o.size;
  if (o.images_per_patient) opts.images_per_patient = *o.images_per_patient;
  opts.seed = resolve_seed(o.seed, config_seed);
  const PhantomSet set = write_phantom_dataset(count, opts, o.output);
  std::size_t pos = 0;
  for (const Record& r : set.records) pos += r.label == Label::kPositive ? 1 : 0;
  std::cout << "wrote " << set.records.size() << " phantoms (" << pos << " positive, " << set.records.size() - pos
            << " negative) to " << o.output.string() << "\n";
  return 0;
}

int run_curate(const CurateOptions& o) {
  ExperimentConfig c = load_config(o.config, o.seed);
  if (o.manifest) {
    c.source.kind = DataSource::Kind::kManifest;
    c.source.manifest = *o.manifest;
  }
  if (o.output) c.output_dir = *o.output;
  const double p_art = o.p_art.value_or(c.confounder.p_art);
  c.confounder.p_art = p_art;

  std::vector<Record> records;
  if (c.source.kind == DataSource::Kind::kPhantom) {
    PhantomOptions opts = c.source.phantom;
    opts.size = c.dataset.image_size;
    opts.pos_fraction = c.dataset.pos_fraction;
    records = write_phantom_dataset(c.source.phantom_count, opts, c.output_dir / "source").records;
  } else {
    records = load_records(c.source.manifest);
  }
  const auto items = curate_benchmark(records, c, p_art);
  const auto rows = materialize_items(items, c.confounder, c.output_dir, derive_seed(c.seed, "materialize"),
                                      c.dataset.image_size);
  write_text(c.output_dir / "config.json", to_json(c).dump(2) + "\n");

  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // split -> (records, confounded)
  for (const ManifestRow& r : rows) {
    auto& [n, k] = counts[r.split];
    ++n;
    k += r.confounded ? 1 : 0;
  }
  std::cout << classify(c.confounder).str() << " p_art=" << p_art << "\n";
  for (const char* split : {"train", "val", "test_iid", "test_ood"}) {
    const auto [n, k] = counts[split];
    std::cout << "  " << split << ": " << n << " images, " << k << " confounded\n";
  }
  return 0;
}

int run_train(const TrainOptions& o) {
  ModelSpec spec;
  TrainConfig tc;
  std::optional<std::uint64_t> config_seed;
  if (o.config) {
    const ExperimentConfig c = load_experiment_config(*o.config);
    spec = c.model;
    tc = c.train;
    tc.batch_size = c.dataset.batch_size;
    config_seed = c.seed;
  }
  const auto rows = read_manifest(o.manifest);
  const auto records = load_records(o.manifest);
  LabeledSet train_set, val_set;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    LabeledSet* dst = rows[i].split == "train" ? &train_set : rows[i].split == "val" ? &val_set : nullptr;
    if (dst == nullptr) continue;
    dst->images.push_back(read_image(records[i].source_path));
    dst->labels.push_back(to_int(records[i].label));
  }
  if (train_set.images.empty()) throw std::runtime_error(o.manifest.string() + ": no rows with split 'train'");
  if (val_set.images.empty()) throw std::runtime_error(o.manifest.string() + ": no rows with split 'val'");
  const TrainedModel trained = train(spec, train_set, val_set, tc, resolve_seed(o.seed, config_seed));
  save_checkpoint(o.output, trained);
  const EpochRecord& best = trained.history[trained.best_epoch];
  std::cout << "trained " << to_string(spec.arch) << " for " << trained.epochs_trained << " epochs; best epoch "
            << trained.best_epoch + 1 << " (val_loss " << best.val_loss << ", val_auc " << best.val_auc << ")\n";
  return 0;
}

int run_evaluate(const EvaluateOptions& o) {
  json out;
  if (o.model) {
    if (!o.manifest) throw std::invalid_argument("--model requires --manifest");
    const TrainedModel trained = load_checkpoint(*o.model);
    const auto rows = read_manifest(*o.manifest);
    const auto records = load_records(*o.manifest);
    std::map<std::string, ScoredSplit> by_split;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].split == "train" || rows[i].split == "val") continue;
      Image img = read_image(records[i].source_path);
      if (img.width() != trained.model.image_width() || img.height() != trained.model.image_height()) {
        img = resize(img, trained.model.image_width(), trained.model.image_height());
      }
      ScoredSplit& s = by_split[rows[i].split.empty() ? "all" : rows[i].split];
      s.scores.push_back(trained.model.logit(trained.model.features(img)));
      s.labels.push_back(to_int(records[i].label));
    }
    if (by_split.empty()) throw std::runtime_error(o.manifest->string() + ": no test rows to score");
    for (const auto& [split, s] : by_split) {
      const double a = auc(s.scores, s.labels);
      out[split] = {{"auc", a}, {"n", s.scores.size()}};
      std::cout << split << ": AUC " << a << " (n=" << s.scores.size() << ")\n";
    }
  } else {
    if (!o.config) throw std::invalid_argument("evaluate needs --model with --manifest, or --config");
    ExperimentConfig c = load_config(*o.config, o.seed);
    c.p_art_grid = {o.p_art.value_or(c.confounder.p_art)};
    const Dataset data = load_dataset(c);
    const auto reports = run_sweep(c, data);
    const EvalReport& r = reports.front();
    out = to_json(r);
    std::printf("%s p_art=%g  i.i.d. AUC %.4f [%.4f, %.4f]  o.o.d. AUC %.4f [%.4f, %.4f]\n", r.confounder_path.c_str(),
                r.p_art, r.iid.mean, r.iid.low, r.iid.high, r.ood.mean, r.ood.low, r.ood.high);
  }
  if (o.output) write_text(*o.output, out.dump(2) + "\n");
  return 0;
}

int run_sweep_cmd(const SweepOptions& o) {
  ExperimentConfig c = load_config(o.config, o.seed);
  if (o.output) c.output_dir = *o.output;
  const Dataset data = load_dataset(c);
  SweepProgress progress;
  if (!o.quiet) {
    progress = [](double p, std::size_t fold, double iid, double ood) {
      std::fprintf(stderr, "p_art=%g fold=%zu iid_auc=%.4f ood_auc=%.4f\n", p, fold, iid, ood);
    };
  }
  const auto reports = run_sweep(c, data, run_fold, progress);
  write_sweep_outputs(c, reports);
  std::cout << "wrote " << (c.output_dir / "results.csv").string() << " and "
            << (c.output_dir / "results.svg").string() << "\n";
  return 0;
}

int run_report(const ReportOptions& o) {
  std::ifstream in(o.results, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + o.results.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto reports = reports_from_csv(buf.str());
  if (reports.empty()) throw std::runtime_error(o.results.string() + ": no result rows");
  const auto svg_path = o.output.value_or(std::filesystem::path(o.results).replace_extension(".svg"));
  write_text(svg_path, render_svg(reports, o.title));

  std::printf("%-8s %-28s %-28s\n", "p_art", "iid AUC [95% CI]", "ood AUC [95% CI]");
  for (const EvalReport& r : reports) {
    char iid[64], ood[64];
    std::snprintf(iid, sizeof iid, "%.4f [%.4f, %.4f]", r.iid.mean, r.iid.low, r.iid.high);
    std::snprintf(ood, sizeof ood, "%.4f [%.4f, %.4f]", r.ood.mean, r.ood.low, r.ood.high);
    std::printf("%-8g %-28s %-28s\n", r.p_art, iid, ood);
  }
  if (reports.size() >= 2) {
    const EvalReport& lo = reports.front();
    const EvalReport& hi = reports.back();
    const double p = permutation_test(lo.ood_aucs, hi.ood_aucs, o.permutations, resolve_seed(o.seed));
    std::printf("o.o.d. AUC p_art=%g vs p_art=%g: permutation p = %.4f\n", lo.p_art, hi.p_art, p);
  }
  std::cout << "wrote " << svg_path.string() << "\n";
  return 0;
}

}  // namespace confound::cli

#include <cstdio>
#include <exception>
#include <functional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "confound/experiment.hpp"

namespace cli = confound::cli;

int main(int argc, char** argv) {
  CLI::App app{"Confounder injection, shortcut-learning benchmarks and o.o.d. evaluation"};
  app.require_subcommand(1);
  std::function<int()> action;

  cli::InjectOptions inject;
  auto* inj = app.add_subcommand("inject", "Apply one confounder to an image and print its taxonomy path");
  inj->add_option("input", inject.input, "Input image (.png, .f32)")->required()->check(CLI::ExistingFile);
  inj->add_option("output", inject.output, "Output image")->required();
  auto* kinds = inj->add_option_group("kind", "Confounder kind");
  kinds->add_flag_callback("--tag", [&] { inject.kind = "tag"; }, "Stamp a text tag");
  kinds->add_flag_callback("--lowpass", [&] { inject.kind = "lowpass"; }, "Ideal low-pass filter");
  kinds->add_flag_callback("--poisson", [&] { inject.kind = "poisson"; }, "Image-domain Poisson noise");
  kinds->add_flag_callback("--poisson-ct", [&] { inject.kind = "poisson_ct"; }, "Projection-domain Poisson noise");
  kinds->add_option("--confounder", inject.confounder_file, "Confounder JSON file")->check(CLI::ExistingFile);
  kinds->require_option(1);
  inj->add_option("--d0", inject.d0, "Low-pass cutoff radius in pixels");
  inj->add_option("--n0", inject.n0, "Source intensity (photons per pixel or detector bin)");
  inj->add_option("--a-max", inject.a_max, "Attenuation mapped to pixel value 1");
  inj->add_option("--angles", inject.angles, "Projection angles for --poisson-ct");
  inj->add_option("--anchor", inject.anchor, "Tag top-left corner ROW,COL");
  inj->add_option("--scale", inject.scale, "Tag glyph scale");
  inj->add_option("--text", inject.text, "Tag text (R, L, space)");
  inj->add_option("--intensity", inject.intensity, "Tag pixel value");
  inj->add_option("--seed", inject.seed, "RNG seed");
  inj->callback([&] { action = [&] { return cli::run_inject(inject); }; });

  cli::PhantomCmdOptions phantom;
  auto* ph = app.add_subcommand("phantom", "Generate a synthetic lung-field phantom dataset");
  ph->add_option("-n,--count", phantom.count, "Number of images");
  ph->add_option("--pos-fraction", phantom.pos_fraction, "Fraction of positive (mass) images");
  ph->add_option("--size", phantom.size, "Image side in pixels");
  ph->add_option("--images-per-patient", phantom.images_per_patient, "Consecutive images sharing a patient id");
  ph->add_option("--config", phantom.config, "Experiment config to take defaults from")->check(CLI::ExistingFile);
  ph->add_option("--seed", phantom.seed, "RNG seed");
  ph->add_option("-o,--output", phantom.output, "Output directory")->required();
  ph->callback([&] { action = [&] { return cli::run_phantom(phantom); }; });

  cli::CurateOptions curate;
  auto* cu = app.add_subcommand("curate", "Write a confounded train/val/test_iid/test_ood benchmark");
  cu->add_option("config", curate.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cu->add_option("--manifest", curate.manifest, "Source manifest.csv (overrides the config source)")
      ->check(CLI::ExistingFile);
  cu->add_option("--p-art", curate.p_art, "Artifact probability")->check(CLI::Range(0.0, 1.0));
  cu->add_option("--seed", curate.seed, "RNG seed");
  cu->add_option("-o,--output", curate.output, "Output directory");
  cu->callback([&] { action = [&] { return cli::run_curate(curate); }; });

  cli::TrainOptions train;
  auto* tr = app.add_subcommand("train", "Train on the train/val rows of a curated manifest");
  tr->add_option("manifest", train.manifest, "Curated manifest.csv")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", train.config, "Experiment config for model and training settings")
      ->check(CLI::ExistingFile);
  tr->add_option("--seed", train.seed, "RNG seed");
  tr->add_option("-o,--output", train.output, "Checkpoint path")->required();
  tr->callback([&] { action = [&] { return cli::run_train(train); }; });

  cli::EvaluateOptions evaluate;
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint, or run k-fold evaluation at one p_art");
  ev->add_option("--model", evaluate.model, "Checkpoint from `train`")->check(CLI::ExistingFile);
  ev->add_option("--manifest", evaluate.manifest, "Curated manifest with test rows")->check(CLI::ExistingFile);
  ev->add_option("--config", evaluate.config, "Experiment config for k-fold mode")->check(CLI::ExistingFile);
  ev->add_option("--p-art", evaluate.p_art, "Artifact probability for k-fold mode")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--seed", evaluate.seed, "RNG seed");
  ev->add_option("-o,--output", evaluate.output, "Report JSON path");
  ev->callback([&] { action = [&] { return cli::run_evaluate(evaluate); }; });

  cli::SweepOptions sweep;
  auto* sw = app.add_subcommand("sweep", "k-fold curate/train/evaluate over the p_art grid");
  sw->add_option("config", sweep.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sw->add_option("--seed", sweep.seed, "RNG seed");
  sw->add_option("-o,--output", sweep.output, "Output directory");
  sw->add_flag("-q,--quiet", sweep.quiet, "No per-fold progress");
  sw->callback([&] { action = [&] { return cli::run_sweep_cmd(sweep); }; });

  cli::ReportOptions report;
  auto* re = app.add_subcommand("report", "Summarise a results CSV and redraw its SVG");
  re->add_option("results", report.results, "results.csv from `sweep`")->required()->check(CLI::ExistingFile);
  re->add_option("-o,--output", report.output, "SVG path (default: next to the CSV)");
  re->add_option("--title", report.title, "Plot title");
  re->add_option("--permutations", report.permutations, "Permutations for the o.o.d. significance test");
  re->add_option("--seed", report.seed, "RNG seed");
  re->callback([&] { action = [&] { return cli::run_report(report); }; });

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return action();
  } catch (const confound::StageError& e) {
    std::fprintf(stderr, "confound %s: %s\n", name.c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "confound %s: error: %s\n", name.c_str(), e.what());
  }
  return 1;
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace confound::cli {

struct InjectOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::string kind;  // tag | lowpass | poisson | poisson_ct
  std::optional<std::filesystem::path> confounder_file;
  std::optional<double> d0;
  std::optional<double> n0;
  std::optional<double> a_max;
  std::optional<std::size_t> angles;
  std::optional<std::string> anchor;  // "row,col"
  std::optional<std::size_t> scale;
  std::optional<std::string> text;
  std::optional<double> intensity;
  std::optional<std::uint64_t> seed;
};

struct PhantomCmdOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::size_t> count;
  std::optional<double> pos_fraction;
  std::optional<std::size_t> size;
  std::optional<std::size_t> images_per_patient;
  std::optional<std::uint64_t> seed;
  std::filesystem::path output;
};

struct CurateOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> manifest;
  std::optional<double> p_art;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
};

struct TrainOptions {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path output;
};

struct EvaluateOptions {
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> config;
  std::optional<double> p_art;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
};

struct SweepOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  bool quiet = false;
};

struct ReportOptions {
  std::filesystem::path results;
  std::optional<std::filesystem::path> output;
  std::string title = "p_art sweep";
  std::size_t permutations = 10000;
  std::optional<std::uint64_t> seed;
};

int run_inject(const InjectOptions& o);
int run_phantom(const PhantomCmdOptions& o);
int run_curate(const CurateOptions& o);
int run_train(const TrainOptions& o);
int run_evaluate(const EvaluateOptions& o);
int run_sweep_cmd(const SweepOptions& o);
int run_report(const ReportOptions& o);

/// --seed, else $CONFOUND_SEED, else the config value, else 42.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config_value = std::nullopt);

}  // namespace confound::cli

#pragma once

// Line-oriented `key = value` run configuration shared by the CLI and the
// benchmark driver. Lines starting with '#' are comments; unknown keys are
// errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "veriflow/alloc.hpp"
#include "veriflow/engine.hpp"
#include "veriflow/linsys.hpp"
#include "veriflow/problem.hpp"
#include "veriflow/scorer.hpp"

namespace veriflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorpusConfig {
  int count = 200;
  std::uint64_t seed = 0;
  SizeParams size;
  std::vector<double> noise_scales = {1.0};  // cycled over problems
  int binning_samples = 64;
};

struct SweepSpec {
  std::vector<int> budgets = {2, 4, 8, 16, 32, 64, 128};
  std::vector<Policy> policies = {Policy::full, Policy::verify_all, Policy::best_of_n, Policy::majority, Policy::beam};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  void validate() const;
};

struct RunConfig {
  EngineConfig engine;
  AllocConfig alloc;
  GeneratorModel gen;
  VerifierModel verifier;
  TrainConfig train;
  CorpusConfig corpus;
  SweepSpec sweep;
  int ablation_budget = 64;
  int explore_budget = 4096;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  void set(std::string_view key, std::string_view value);
  // Every seed in the configuration replaced by `seed`.
  void override_seeds(std::uint64_t seed);
};

// Defaults, then the file's assignments, then VERIFLOW_SEED if set.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::string_view text);
void apply_env_overrides(RunConfig& cfg);

// Canonical rendering of every key, one `key = value` per line.
std::string render_config(const RunConfig& cfg);

}  // namespace veriflow

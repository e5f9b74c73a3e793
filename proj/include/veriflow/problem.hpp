#pragma once

// Seeded linear-system problems, exact oracles over them, and difficulty
// binning from unverified rollout pass rates.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "veriflow/core.hpp"
#include "veriflow/linsys.hpp"

namespace veriflow {

struct Problem {
  std::string problem_id;
  State initial;  // canonical, budget 0
  std::map<std::string, Rational> solution;
  int difficulty_bin = 0;  // 1..5 once binned
  std::uint64_t gen_seed = 0;
  double noise_scale = 1.0;  // per-problem multiplier on the proposer's error mass

  const GoalSpec& goal() const { return initial.goal; }
  Rational true_answer() const { return solution.at(initial.goal.target); }
};

struct SizeParams {
  int vars_min = 2;
  int vars_max = 3;
  int coef_max = 5;
  int solution_max = 5;
  bool open_goal = true;
  int max_steps = 16;  // the constructive derivation must finish within this

  void validate() const;
};

struct SearchCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unique solution of the trace by exact Gauss-Jordan elimination over the
// given variables; nullopt when singular or inconsistent.
std::optional<std::map<std::string, Rational>> exact_solve(const std::vector<Equation>& trace,
                                                           const std::vector<std::string>& vars);

// Steps taken by a fixed greedy derivation (substitute, isolate, eliminate)
// to bind the goal; nullopt when it stalls or exceeds `limit`.
std::optional<int> constructive_steps(const State& w, int limit);

Problem make_problem(std::string id, std::vector<Equation> trace, GoalSpec goal, std::uint64_t seed = 0);
Problem gen_problem(std::uint64_t seed, const SizeParams& size = {});

// Shortest derivation to the goal using only correct moves (multipliers in
// [-3,3] without 0) by breadth-first search over canonical states. nullopt
// when the goal is unreachable within the explored space; throws
// SearchCapExceeded after `cap` distinct states.
std::optional<int> bfs_min_steps(const State& w, std::size_t cap = 1'000'000);

struct BinningResult {
  std::vector<int> bins;          // per input problem, 1 (easiest) .. 5
  std::vector<double> pass_rate;  // fraction of rollouts ending at the true answer
};

// Pass rate of `samples` unverified greedy rollouts per problem; problems
// sorted by descending pass rate (ties by problem_id) are cut into quintiles.
BinningResult bin_difficulty(const std::vector<Problem>& problems, const GeneratorModel& gen, int max_steps,
                             int samples = 64, std::uint64_t seed = 0);
// Quintile assignment from precomputed rates.
std::vector<int> quintile_bins(const std::vector<double>& pass_rate, const std::vector<std::string>& ids);

nlohmann::json to_json(const Problem& p);
Problem problem_from_json(const nlohmann::json& j);

// Writes <dir>/<id>.json per problem and the index <dir>/corpus.jsonl.
void write_corpus(const std::filesystem::path& dir, const std::vector<Problem>& problems);
// Reads a corpus index (or a directory containing corpus.jsonl).
std::vector<Problem> read_corpus(const std::filesystem::path& path);

}  // namespace veriflow

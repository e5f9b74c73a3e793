#pragma once

// Experiment driver: exploration data collection, per-policy runs, budget
// sweeps, the ablation matrix, and CSV / aligned-table reports.
//
// Budget normalization: one complete unverified rollout is one generation
// unit, and the gated policies at sweep point N get a verifier budget of
// B = N calls.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veriflow/config.hpp"
#include "veriflow/engine.hpp"
#include "veriflow/problem.hpp"
#include "veriflow/scorer.hpp"

namespace veriflow {

inline constexpr const char* kBudgetNormalization =
    "budget normalization: gated policies get B = N verifier calls; best_of_n, majority and beam draw N rollouts "
    "or proposals; majority vote uses no verifier";

// Per-problem stream seed shared by every policy in a sweep.
std::uint64_t problem_seed(std::uint64_t seed, const std::string& problem_id);

// Problems seeded from corpus.seed, ids "s<seed>-<index>", noise scales
// cycled, then binned by unverified rollout pass rate.
std::vector<Problem> generate_corpus(const CorpusConfig& corpus, const GeneratorModel& gen, int max_steps,
                                     int threads = 0);

struct RunSummary {
  std::string problem_id;
  std::string policy;
  int budget = 0;
  std::uint64_t seed = 0;
  std::string outcome;
  std::optional<Rational> answer;
  bool correct = false;
  long verifier_calls = 0;
  long generation_calls = 0;
  int steps = 0;
  bool ledger_consistent = true;  // C_ver equals the sum of per-state queries
  bool within_budget = true;      // C_ver <= B where the policy takes a budget

  nlohmann::json to_json() const;
};

RunSummary run_policy(const Problem& problem, Policy policy, int budget, std::uint64_t seed, const RunConfig& cfg,
                      const ScorerParams& params, const std::string& label = "");

struct ResultRow {
  std::string policy;
  int budget = 0;
  std::uint64_t seed = 0;
  int problems = 0;
  double accuracy = 0.0;
  double mean_verifier_calls = 0.0;
  double mean_generation_calls = 0.0;
  std::array<double, 5> bin_accuracy{};  // NaN-free: bins with no problems report 0
  std::array<int, 5> bin_count{};
  bool ledger_ok = true;
};

ResultRow aggregate(const std::string& policy, int budget, std::uint64_t seed, const std::vector<Problem>& problems,
                    const std::vector<RunSummary>& runs);

// Runs every (policy, budget, seed) cell over the corpus. Rows are sorted
// by the Policy enum order, then budget, then seed.
std::vector<ResultRow> run_sweep(const std::vector<Problem>& problems, const SweepSpec& spec, const RunConfig& cfg,
                                 const ScorerParams& params, std::vector<RunSummary>* runs = nullptr);

// The four ablation configurations at one nominal budget:
//   verify_all           every proposed candidate verified, no gates
//   gates_only           every gated candidate verified
//   gates_dtype_fixed_k  gates, ranked by D_type alone, k = k_base
//   full                 gates, D_type + residual, adaptive k
std::vector<ResultRow> run_ablation(const std::vector<Problem>& problems, const RunConfig& cfg,
                                    const ScorerParams& params, const std::vector<std::uint64_t>& seeds, int budget,
                                    std::vector<RunSummary>* runs = nullptr);

struct CellSummary {
  std::string policy;
  int budget = 0;
  int seeds = 0;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;  // across seeds, population
  double mean_verifier_calls = 0.0;
  double mean_generation_calls = 0.0;
};

// Mean over seeds per (policy, budget), in first-appearance order.
std::vector<CellSummary> summarize(const std::vector<ResultRow>& rows);

struct ExploreResult {
  std::vector<CandidateRecord> dataset;
  std::vector<TrajectoryRecord> trajectories;
  std::vector<nlohmann::json> log;  // one line per decision point
  long decision_points = 0;
};

// Synthetic ranking corpus over real linear-system states: at each state a
// sample of applicable moves is labelled 1 exactly when the move is an
// isolate step. Every state carries both labels, so the within-state ranking
// is separable by the move text alone.
std::vector<CandidateRecord> separable_corpus(std::uint64_t seed, int states = 300, int candidates_per_state = 8);

// Solves every problem with exhaustive verification of gated candidates,
// collecting verifier labels. The scorer (untrained when null) only orders
// commitments among accepted moves.
ExploreResult explore(const std::vector<Problem>& problems, const RunConfig& cfg,
                      const ScorerParams* params = nullptr);
// Writes dataset.jsonl, trajectories.jsonl and exploration.jsonl.
void write_exploration(const std::filesystem::path& dir, const ExploreResult& r);

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
               const std::vector<std::string>& header_comments = {});
std::string render_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& header_comments = {});
std::vector<ResultRow> read_csv(const std::filesystem::path& path);
std::string render_table(const std::vector<ResultRow>& rows);
std::string render_summary_table(const std::vector<CellSummary>& cells);

}  // namespace veriflow

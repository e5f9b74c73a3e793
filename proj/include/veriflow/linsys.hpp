#pragma once

// Linear-system task domain: a seeded step proposer with a configurable
// error mix, and the adapter the search engine drives.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "veriflow/core.hpp"
#include "veriflow/gates.hpp"
#include "veriflow/rng.hpp"
#include "veriflow/scorer.hpp"

namespace veriflow {

enum class CandidateKind { valid, wrong_claim, malformed, contradict };
std::string_view candidate_kind_name(CandidateKind k);

struct GeneratorModel {
  int candidates_per_state = 8;
  double p_valid = 0.45;
  double p_wrong_claim = 0.25;
  double p_malformed = 0.2;
  double p_contradict = 0.1;
  std::uint64_t rng_seed = 0;
  // Multiplier on the error mass at depth d; the last entry repeats.
  std::vector<double> depth_noise = {1.0};
  // Probability that a valid or wrong-claim candidate is built on a move
  // that makes progress toward isolating a variable.
  double focus = 0.6;

  void validate() const;
  double noise_multiplier(int depth) const;
};

// Multipliers shared by the proposer and the shortest-derivation oracle.
inline constexpr int kMaxMultiplier = 3;

// Every structurally applicable (op, args) at w with its exact claim, in a
// fixed enumeration order. Moves whose result leaves the canonical state
// unchanged are omitted.
std::vector<Move> applicable_moves(const State& w);

// Subset of applicable moves that visibly advance elimination: isolating a
// single-variable equation, substituting a known value, cancelling a shared
// variable with a small integer multiplier, or normalizing a shared pivot.
std::vector<Move> progress_moves(const State& w);

// Draws `count` candidates at w. `noise_scale` multiplies the error mass on
// top of the per-depth schedule. Wrong claims are systematic: the same base
// move at the same state always receives the same wrong claim.
std::vector<Move> propose(const GeneratorModel& gen, const State& w, Rng& rng, int count, double noise_scale = 1.0,
                          std::vector<CandidateKind>* kinds = nullptr);

// Exact verification: the claim equals the recomputation up to sign.
bool exact_check(const State& w, const Move& m);

struct Problem;

// Adapter presenting one problem to the search engine. States are kept
// canonical, so move indices refer to canonical trace order.
class LinsysDomain {
 public:
  using State = veriflow::State;
  using Move = veriflow::Move;

  LinsysDomain(const Problem& problem, const GeneratorModel& gen);

  std::string id() const;
  State initial() const;
  std::vector<Move> propose(const State& s, Rng& rng, int count) const;
  int candidates_per_state() const { return gen_.candidates_per_state; }
  GateReport gate(const State& s, const Move& m) const { return gate_both(s, m); }
  bool check(const State& s, const Move& m) const { return exact_check(s, m); }
  State apply(const State& s, const Move& m) const;
  bool is_goal(const State& s) const { return goal_test(s, s.goal); }
  std::optional<Rational> answer(const State& s) const;
  int depth(const State& s) const { return s.depth; }
  std::string state_text(const State& s) const { return serialize_state(s); }
  std::string move_text(const Move& m) const { return serialize_move(m); }
  std::string goal_text() const;
  std::string precondition_key(const State& s) const;
  std::string move_template(const Move& m) const { return veriflow::move_template(m); }
  std::optional<Move> instantiate(const std::string& tmpl, const State& s) const;

  const Problem& problem() const { return *problem_; }

 private:
  const Problem* problem_;
  GeneratorModel gen_;
};

// Accepted trajectory rendered for the scorer's trajectory loss.
template <class Traj>
TrajectoryRecord trajectory_record(const std::string& problem_id, const Traj& t) {
  TrajectoryRecord r;
  r.problem_id = problem_id;
  r.solved = t.solved();
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& [w, m] = t.steps[i];
    const auto& post = i + 1 < t.steps.size() ? t.steps[i + 1].first : t.final_state;
    r.steps.push_back({serialize_state(w), serialize_move(m), w.goal.str(), serialize_state(post)});
  }
  return r;
}

}  // namespace veriflow

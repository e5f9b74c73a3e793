#pragma once

// Structured move interface over linear-equation systems.
//
// A State is the triple (remaining verifier budget, trace of equations,
// constraint context) plus the goal it is working toward. A Move is an
// operator from a closed set, its arguments, and the equation the proposer
// claims results from applying it. apply() trusts the claim; deciding whether
// the claim is actually right is the verifier's job.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "veriflow/rational.hpp"

namespace veriflow {

struct ParseError : std::runtime_error {
  ParseError(std::size_t offset, std::string expected);
  std::size_t offset;
  std::string expected;
};

struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear equation sum(coeffs[v] * v) = constant. Zero coefficients are never
// stored, so the map doubles as the variable support.
struct Equation {
  std::map<std::string, Rational> coeffs;
  Rational constant;

  Rational coeff(const std::string& var) const;
  bool has(const std::string& var) const { return coeffs.contains(var); }
  std::size_t arity() const { return coeffs.size(); }

  Equation scaled(const Rational& c) const;
  // *this + c * other
  Equation plus_multiple(const Equation& other, const Rational& c) const;
  // Replace var by value, moving its contribution to the right-hand side.
  Equation substituted(const std::string& var, const Rational& value) const;

  // Sign convention: first (lexicographically smallest) coefficient positive.
  Equation canonical() const;
  bool is_canonical() const { return canonical() == *this; }

  // c1*v1+c2*v2=c0 with unit coefficients elided; empty left side renders "0".
  std::string str() const;

  friend bool operator==(const Equation&, const Equation&) = default;
  friend auto operator<=>(const Equation&, const Equation&) = default;
};

// Single-variable equation a*v = c with a != 0 solves to v = c/a.
std::optional<std::pair<std::string, Rational>> single_variable_solution(const Equation& eq);

Equation parse_equation(std::string_view text);

enum class Op { scale, addmul, isolate, subst };

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);
// Expected argument count: scale(i,c) addmul(i,j,c) isolate(i,v) subst(i,v).
std::size_t op_arity(Op op);

using Arg = std::variant<Rational, std::string>;

struct Move {
  Op op = Op::scale;
  std::vector<Arg> args;
  Equation claim;

  friend bool operator==(const Move&, const Move&) = default;
};

// Parses `op(arg,...|claim)`. Whitespace between tokens is tolerated.
Move parse_move(std::string_view text);
std::string serialize_move(const Move& m);
// The move without its claim: `op(arg,...)`. Used as a retrieval template.
std::string move_template(const Move& m);

struct ConstraintContext {
  std::map<std::string, Rational> bindings;
  std::set<Equation> invariants;  // canonical equations established so far

  friend bool operator==(const ConstraintContext&, const ConstraintContext&) = default;
};

struct GoalSpec {
  std::string target;
  std::optional<Rational> value;  // nullopt: any value binds the goal

  std::string str() const;  // "goal: x=2" or "goal: x=?"
  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

struct State {
  int remaining_budget = 0;
  std::vector<Equation> trace;
  ConstraintContext context;
  GoalSpec goal;
  int depth = 0;
  std::vector<std::string> scope;  // sorted problem variables

  bool in_scope(const std::string& var) const;
};

// Identity of a state for search purposes: trace, bindings, and goal. The
// remaining budget, depth, and invariant history are deliberately excluded.
bool same_state(const State& a, const State& b);

// Equations one per line in canonical order, then `ctx:` with sorted
// bindings, then the goal line. Byte-identical for equal canonical states.
std::string serialize_state(const State& w);
State parse_state(std::string_view text, std::vector<std::string> scope, int remaining_budget = 0);

State make_state(std::vector<Equation> trace, GoalSpec goal, std::vector<std::string> scope, int budget);

struct Canonicalized {
  State state;
  std::vector<std::size_t> new_index;  // old trace position -> canonical position
};

Canonicalized canonicalize_with_permutation(const State& w);
State canonicalize(const State& w);

// Rewrites equation-index arguments of m according to a canonicalization.
Move remap_move(const Move& m, const std::vector<std::size_t>& new_index);

// 1-based index argument; nullopt when the argument is not a positive integer
// or falls outside the trace.
std::optional<std::size_t> index_arg(const State& w, const Arg& a);

// Exact recomputation of op(args) on w. nullopt when the move is not
// structurally applicable (bad indices, zero multiplier, zero pivot, ...).
std::optional<Equation> recompute(const State& w, const Move& m);

// Replaces the targeted equation with m.claim, folds the claim into the
// context, and increments depth. Budget is left untouched. Throws
// StructuralError when the target index is unusable.
State apply(const State& w, const Move& m);

bool goal_test(const State& w, const GoalSpec& g);

enum class Outcome { solved, budget_exhausted, step_limit, dead_end };
std::string_view outcome_name(Outcome o);

template <class S, class M>
struct BasicTrajectory {
  std::vector<std::pair<S, M>> steps;
  S final_state{};
  Outcome outcome = Outcome::dead_end;
  std::optional<Rational> final_answer;

  std::size_t length() const { return steps.size(); }
  bool solved() const { return outcome == Outcome::solved; }
};

using Trajectory = BasicTrajectory<State, Move>;

}  // namespace veriflow

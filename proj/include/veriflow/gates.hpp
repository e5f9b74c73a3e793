#pragma once

// Deterministic necessary-condition filters. Neither gate ever consults the
// verifier; a move that passes both can still be wrong.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "veriflow/core.hpp"

namespace veriflow {

enum class GateKind { structural, context };

enum class GateCode {
  ok,
  arity,               // wrong argument count for the operator
  bad_argument,        // argument of the wrong kind (index vs variable vs number)
  index_out_of_range,
  same_index,          // addmul target == source
  zero_multiplier,
  var_out_of_scope,
  zero_pivot,          // isolate on a variable with zero coefficient
  subst_unbound,       // subst on a variable with no binding
  subst_absent,        // subst on a variable missing from the equation
  claim_out_of_scope,
  binding_conflict,       // Delta binds a variable to a second value
  substitution_conflict,  // claim reduces to 0=c, c!=0, under known bindings
  invariant_conflict,     // claim parallel to an established equation with another constant
};

std::string_view gate_code_name(GateCode c);

struct GateReport {
  bool passed = true;
  GateKind gate = GateKind::structural;
  GateCode code = GateCode::ok;
  std::string message;

  static GateReport pass(GateKind g) { return {true, g, GateCode::ok, "ok"}; }
  static GateReport fail(GateKind g, GateCode c, std::string msg) { return {false, g, c, std::move(msg)}; }
};

struct ConstraintDelta {
  std::map<std::string, Rational> new_bindings;
  std::set<Equation> new_equations;

  friend bool operator==(const ConstraintDelta&, const ConstraintDelta&) = default;
};

struct ConstraintSet {
  std::map<std::string, Rational> bindings;
  std::set<Equation> equations;

  bool empty() const { return bindings.empty() && equations.empty(); }
  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

GateReport gate_struct(const State& w, const Move& m);

ConstraintSet extract_ctx(const State& w);
ConstraintDelta compute_delta(const State& w, const Move& m);

// Consistent(Ctx(w) u Delta): no variable carries two values and no equation
// degenerates to 0=c with c != 0.
bool consistent(const ConstraintSet& ctx, const ConstraintDelta& delta);
// Violates(Ctx(w), Delta): the claim, under known bindings, collapses to a
// false constant identity or contradicts a parallel established equation.
bool violates(const ConstraintSet& ctx, const ConstraintDelta& delta);

GateReport gate_ctx(const State& w, const Move& m);

// Both gates in order; the report names the first gate that failed.
GateReport gate_both(const State& w, const Move& m);

struct GateFilterResult {
  std::vector<Move> passed;
  std::vector<GateReport> reports;  // one per input, input order
};

GateFilterResult gate_filter(const State& w, const std::vector<Move>& moves);

}  // namespace veriflow

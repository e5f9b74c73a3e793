#include <doctest.h>

#include "veriflow/gates.hpp"
#include "veriflow/linsys.hpp"
#include "veriflow/problem.hpp"
#include "veriflow/rng.hpp"

using namespace veriflow;

namespace {

State p0() {
  return make_state({parse_equation("x+y=3"), parse_equation("x-y=1")}, GoalSpec{"x", Rational(2)}, {"x", "y"}, 0);
}

}  // namespace

TEST_CASE("structural gate examples") {
  State w = p0();
  auto r = gate_struct(w, parse_move("scale(3,2|2x=2)"));
  CHECK_FALSE(r.passed);
  CHECK(r.code == GateCode::index_out_of_range);
  r = gate_struct(w, parse_move("scale(1,0|0=0)"));
  CHECK_FALSE(r.passed);
  CHECK(r.code == GateCode::zero_multiplier);
  CHECK(gate_struct(w, parse_move("addmul(1,2,1|2x=4)")).passed);
  CHECK(gate_struct(w, parse_move("addmul(1,1,1|2x=4)")).code == GateCode::same_index);
  CHECK(gate_struct(w, parse_move("isolate(1,q|q=1)")).code == GateCode::var_out_of_scope);
  CHECK(gate_struct(w, parse_move("subst(1,y|x=2)")).code == GateCode::subst_unbound);
}

TEST_CASE("context extraction and delta") {
  State w = p0();
  w.context = ConstraintContext{};
  CHECK(extract_ctx(w).empty());
  w.context.bindings["y"] = Rational(1);
  ConstraintSet ctx = extract_ctx(w);
  CHECK(ctx.bindings == std::map<std::string, Rational>{{"y", Rational(1)}});
  CHECK(ctx.equations.empty());
  CHECK(extract_ctx(p0()).equations.size() == 2);

  State v = p0();
  ConstraintDelta d = compute_delta(v, parse_move("addmul(1,2,1|2x=4)"));
  CHECK(d.new_bindings == std::map<std::string, Rational>{{"x", Rational(2)}});
  CHECK(d == compute_delta(v, parse_move("addmul(1,2,1|2x=4)")));
  ConstraintDelta e = compute_delta(v, parse_move("scale(1,1|x+y=3)"));
  CHECK(e.new_bindings.empty());
  CHECK(e.new_equations == std::set<Equation>{parse_equation("x+y=3")});
}

TEST_CASE("context gate examples") {
  State w = p0();
  w.context.bindings["y"] = Rational(1);
  auto r = gate_ctx(w, parse_move("scale(2,1|y=2)"));
  CHECK_FALSE(r.passed);
  CHECK(r.code == GateCode::binding_conflict);
  CHECK(consistent(extract_ctx(w), ConstraintDelta{}));
  CHECK_FALSE(violates(extract_ctx(w), ConstraintDelta{}));
  CHECK(gate_ctx(w, parse_move("subst(1,y|x=2)")).passed);

  State v = p0();
  v.context.bindings["x"] = Rational(2);
  CHECK(gate_ctx(v, parse_move("scale(1,1|x+y=3)")).passed);
  auto bad = gate_ctx(v, parse_move("subst(1,x|y=5)"));
  CHECK(gate_both(v, parse_move("subst(1,x|y=1)")).passed);
  CHECK(bad.passed);  // y=5 conflicts with nothing tracked; the verifier rejects it
  v.context.bindings["y"] = Rational(1);
  CHECK(gate_ctx(v, parse_move("scale(1,1|x+y=4)")).code == GateCode::substitution_conflict);
}

TEST_CASE("gate_filter on empty input and idempotence") {
  State w = p0();
  CHECK(gate_filter(w, {}).passed.empty());
  std::vector<Move> moves{parse_move("addmul(1,2,1|2x=4)"), parse_move("scale(1,0|0=0)"),
                          parse_move("scale(5,1|x=1)"), parse_move("isolate(2,x|x-y=1)")};
  auto once = gate_filter(w, moves);
  CHECK(once.reports.size() == moves.size());
  auto twice = gate_filter(w, once.passed);
  CHECK(twice.passed == once.passed);
}

TEST_CASE("gates never reject a move the exact verifier accepts") {
  GeneratorModel gen;
  gen.p_valid = 0.7;
  gen.p_wrong_claim = 0.1;
  gen.p_malformed = 0.1;
  gen.p_contradict = 0.1;
  Rng rng(2024);
  long candidates = 0, accepted = 0, rejected_accepted = 0;
  for (std::uint64_t seed = 0; candidates < 12000; ++seed) {
    Problem pr = gen_problem(seed);
    State w = pr.initial;
    for (int step = 0; step < 6; ++step) {
      std::vector<CandidateKind> kinds;
      auto moves = propose(gen, w, rng, 16, 1.0, &kinds);
      for (const auto& m : moves) {
        ++candidates;
        if (!exact_check(w, m)) continue;
        ++accepted;
        if (!gate_both(w, m).passed) ++rejected_accepted;
      }
      auto all = applicable_moves(w);
      if (all.empty()) break;
      w = canonicalize(apply(w, all[rng.below(all.size())]));
    }
  }
  CHECK(candidates >= 10000);
  CHECK(accepted > 1000);
  CHECK(rejected_accepted == 0);
  MESSAGE("candidates ", candidates, ", verifier-accepted ", accepted);
}

#include "veriflow/gates.hpp"

#include <array>

namespace veriflow {

std::string_view gate_code_name(GateCode c) {
  static constexpr std::array<std::string_view, 14> names = {
      "ok",           "arity",           "bad_argument",       "index_out_of_range",
      "same_index",   "zero_multiplier", "var_out_of_scope",   "zero_pivot",
      "subst_unbound", "subst_absent",   "claim_out_of_scope", "binding_conflict",
      "substitution_conflict", "invariant_conflict"};
  return names[static_cast<std::size_t>(c)];
}

namespace {

GateReport struct_fail(GateCode c, std::string msg) { return GateReport::fail(GateKind::structural, c, std::move(msg)); }
GateReport ctx_fail(GateCode c, std::string msg) { return GateReport::fail(GateKind::context, c, std::move(msg)); }

}  // namespace

GateReport gate_struct(const State& w, const Move& m) {
  if (m.args.size() != op_arity(m.op))
    return struct_fail(GateCode::arity, std::string(op_name(m.op)) + " takes " + std::to_string(op_arity(m.op)) +
                                            " arguments, got " + std::to_string(m.args.size()));
  auto index_check = [&](const Arg& a) -> std::optional<GateReport> {
    const auto* r = std::get_if<Rational>(&a);
    if (!r || !r->is_integer()) return struct_fail(GateCode::bad_argument, "equation index must be an integer");
    if (!index_arg(w, a))
      return struct_fail(GateCode::index_out_of_range,
                         "index " + r->str() + " outside 1.." + std::to_string(w.trace.size()));
    return std::nullopt;
  };
  if (auto bad = index_check(m.args[0])) return *bad;
  const Equation& target = w.trace[*index_arg(w, m.args[0])];

  switch (m.op) {
    case Op::scale: {
      const auto* c = std::get_if<Rational>(&m.args[1]);
      if (!c) return struct_fail(GateCode::bad_argument, "scale multiplier must be a number");
      if (c->is_zero()) return struct_fail(GateCode::zero_multiplier, "scale by zero");
      break;
    }
    case Op::addmul: {
      if (auto bad = index_check(m.args[1])) return *bad;
      if (*index_arg(w, m.args[0]) == *index_arg(w, m.args[1]))
        return struct_fail(GateCode::same_index, "addmul target and source coincide");
      const auto* c = std::get_if<Rational>(&m.args[2]);
      if (!c) return struct_fail(GateCode::bad_argument, "addmul multiplier must be a number");
      if (c->is_zero()) return struct_fail(GateCode::zero_multiplier, "addmul by zero");
      break;
    }
    case Op::isolate:
    case Op::subst: {
      const auto* v = std::get_if<std::string>(&m.args[1]);
      if (!v) return struct_fail(GateCode::bad_argument, "expected a variable name");
      if (!w.in_scope(*v)) return struct_fail(GateCode::var_out_of_scope, "variable '" + *v + "' not in scope");
      if (m.op == Op::isolate) {
        if (!target.has(*v)) return struct_fail(GateCode::zero_pivot, "'" + *v + "' has zero coefficient");
      } else {
        if (!w.context.bindings.contains(*v))
          return struct_fail(GateCode::subst_unbound, "'" + *v + "' has no binding");
        if (!target.has(*v)) return struct_fail(GateCode::subst_absent, "'" + *v + "' absent from equation");
      }
      break;
    }
  }
  for (const auto& [v, a] : m.claim.coeffs)
    if (!w.in_scope(v)) return struct_fail(GateCode::claim_out_of_scope, "claim mentions '" + v + "'");
  return GateReport::pass(GateKind::structural);
}

ConstraintSet extract_ctx(const State& w) { return {w.context.bindings, w.context.invariants}; }

ConstraintDelta compute_delta(const State&, const Move& m) {
  ConstraintDelta d;
  Equation claim = m.claim.canonical();
  if (auto sol = single_variable_solution(claim)) d.new_bindings.emplace(sol->first, sol->second);
  d.new_equations.insert(std::move(claim));
  return d;
}

bool consistent(const ConstraintSet& ctx, const ConstraintDelta& delta) {
  for (const auto& [v, val] : delta.new_bindings) {
    auto it = ctx.bindings.find(v);
    if (it != ctx.bindings.end() && it->second != val) return false;
  }
  for (const auto& eq : delta.new_equations)
    if (eq.coeffs.empty() && !eq.constant.is_zero()) return false;
  return true;
}

namespace {

// Is b = lambda * a on the left-hand side? Returns lambda.
std::optional<Rational> parallel_factor(const Equation& a, const Equation& b) {
  if (a.coeffs.empty() || a.coeffs.size() != b.coeffs.size()) return std::nullopt;
  std::optional<Rational> lambda;
  auto ia = a.coeffs.begin();
  auto ib = b.coeffs.begin();
  for (; ia != a.coeffs.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return std::nullopt;
    Rational f = ib->second / ia->second;
    if (lambda && *lambda != f) return std::nullopt;
    lambda = f;
  }
  return lambda;
}

}  // namespace

bool violates(const ConstraintSet& ctx, const ConstraintDelta& delta) {
  try {
    for (const auto& eq : delta.new_equations) {
      Equation reduced = eq;
      for (const auto& [v, val] : ctx.bindings) reduced = reduced.substituted(v, val);
      if (reduced.coeffs.empty() && !reduced.constant.is_zero()) return true;
      for (const auto& inv : ctx.equations) {
        auto lambda = parallel_factor(inv, eq);
        if (lambda && inv.constant * *lambda != eq.constant) return true;
      }
    }
  } catch (const OverflowError&) {
    return false;
  }
  return false;
}

GateReport gate_ctx(const State& w, const Move& m) {
  ConstraintSet ctx = extract_ctx(w);
  ConstraintDelta delta = compute_delta(w, m);
  if (!consistent(ctx, delta)) {
    for (const auto& [v, val] : delta.new_bindings) {
      auto it = ctx.bindings.find(v);
      if (it != ctx.bindings.end() && it->second != val)
        return ctx_fail(GateCode::binding_conflict, v + " already bound to " + it->second.str());
    }
    return ctx_fail(GateCode::substitution_conflict, "claim is a false constant identity");
  }
  if (violates(ctx, delta)) {
    Equation reduced = *delta.new_equations.begin();
    for (const auto& [v, val] : ctx.bindings) reduced = reduced.substituted(v, val);
    if (reduced.coeffs.empty())
      return ctx_fail(GateCode::substitution_conflict, "claim contradicts known bindings");
    return ctx_fail(GateCode::invariant_conflict, "claim contradicts an established equation");
  }
  return GateReport::pass(GateKind::context);
}

GateReport gate_both(const State& w, const Move& m) {
  GateReport s = gate_struct(w, m);
  if (!s.passed) return s;
  return gate_ctx(w, m);
}

GateFilterResult gate_filter(const State& w, const std::vector<Move>& moves) {
  GateFilterResult out;
  out.reports.reserve(moves.size());
  for (const auto& m : moves) {
    out.reports.push_back(gate_both(w, m));
    if (out.reports.back().passed) out.passed.push_back(m);
  }
  return out;
}

}  // namespace veriflow

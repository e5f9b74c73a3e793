#include "veriflow/linsys.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "veriflow/embed.hpp"
#include "veriflow/problem.hpp"

namespace veriflow {

std::string_view candidate_kind_name(CandidateKind k) {
  switch (k) {
    case CandidateKind::valid: return "valid";
    case CandidateKind::wrong_claim: return "wrong_claim";
    case CandidateKind::malformed: return "malformed";
    case CandidateKind::contradict: return "contradict";
  }
  return "?";
}

void GeneratorModel::validate() const {
  const double ps[] = {p_valid, p_wrong_claim, p_malformed, p_contradict};
  double sum = 0;
  for (double p : ps) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("generator probabilities must lie in [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("generator probabilities must sum to 1");
  if (candidates_per_state < 1) throw std::invalid_argument("candidates_per_state must be >= 1");
  if (depth_noise.empty()) throw std::invalid_argument("depth_noise must be non-empty");
  for (double d : depth_noise)
    if (!(d >= 0.0)) throw std::invalid_argument("depth_noise entries must be >= 0");
  if (!(focus >= 0.0 && focus <= 1.0)) throw std::invalid_argument("focus must lie in [0,1]");
}

double GeneratorModel::noise_multiplier(int depth) const {
  if (depth_noise.empty()) return 1.0;
  std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max(depth, 0)), depth_noise.size() - 1);
  return depth_noise[i];
}

namespace {

Move make_move(Op op, std::vector<Arg> args, Equation claim) { return Move{op, std::move(args), std::move(claim)}; }

Arg idx(std::size_t i) { return Rational(static_cast<std::int64_t>(i + 1)); }

// apply() swaps trace[i] for the claim and may add a binding, so the
// canonical state moves exactly when one of those two things is new.
bool changes_state(const State& w, const Move& m) {
  const Equation& target = w.trace[*index_arg(w, m.args[0])];
  if (m.claim.canonical() != target.canonical()) return true;
  auto sol = single_variable_solution(m.claim);
  return sol && !w.context.bindings.contains(sol->first);
}

std::vector<int> multipliers() {
  std::vector<int> out;
  for (int c = -kMaxMultiplier; c <= kMaxMultiplier; ++c)
    if (c != 0) out.push_back(c);
  return out;
}

void push_if_useful(const State& w, std::vector<Move>& out, Op op, std::vector<Arg> args) {
  Move m = make_move(op, std::move(args), {});
  auto claim = recompute(w, m);
  if (!claim) return;
  m.claim = *claim;
  if (changes_state(w, m)) out.push_back(std::move(m));
}

}  // namespace

std::vector<Move> applicable_moves(const State& w) {
  std::vector<Move> out;
  const std::size_t n = w.trace.size();
  const auto mults = multipliers();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c : mults)
      if (c != 1 && c != -1) push_if_useful(w, out, Op::scale, {idx(i), Rational(c)});
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        for (int c : mults) push_if_useful(w, out, Op::addmul, {idx(i), idx(j), Rational(c)});
    for (const auto& [v, a] : w.trace[i].coeffs) push_if_useful(w, out, Op::isolate, {idx(i), v});
    for (const auto& [v, a] : w.trace[i].coeffs)
      if (w.context.bindings.contains(v)) push_if_useful(w, out, Op::subst, {idx(i), v});
  }
  return out;
}

std::vector<Move> progress_moves(const State& w) {
  std::vector<Move> out;
  const std::size_t n = w.trace.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Equation& e = w.trace[i];
    for (const auto& [v, a] : e.coeffs)
      if (e.arity() >= 2 && w.context.bindings.contains(v)) push_if_useful(w, out, Op::subst, {idx(i), v});
    if (e.arity() == 1 && !w.context.bindings.contains(e.coeffs.begin()->first))
      push_if_useful(w, out, Op::isolate, {idx(i), e.coeffs.begin()->first});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Equation& e = w.trace[i];
    if (e.arity() < 2) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Equation& f = w.trace[j];
      for (const auto& [v, a] : e.coeffs) {
        Rational b = f.coeff(v);
        if (b.is_zero() || f.arity() > e.arity()) continue;
        Rational c;
        try {
          c = -(a / b);
        } catch (const OverflowError&) {
          continue;
        }
        if (c.is_integer() && c.abs() <= Rational(kMaxMultiplier)) push_if_useful(w, out, Op::addmul, {idx(i), idx(j), c});
      }
    }
    for (const auto& [v, a] : e.coeffs) {
      if (a == Rational(1)) continue;
      bool shared = false;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && w.trace[j].has(v)) shared = true;
      if (shared) push_if_useful(w, out, Op::isolate, {idx(i), v});
    }
  }
  // duplicates can arise from the two isolate rules
  std::vector<Move> unique;
  for (auto& m : out)
    if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(std::move(m));
  return unique;
}

bool exact_check(const State& w, const Move& m) {
  auto r = recompute(w, m);
  return r && r->canonical() == m.claim.canonical();
}

namespace {

// Deterministic perturbation stream for a (state, move) pair so the same
// mistake recurs whenever the proposer revisits the same step.
std::uint64_t mistake_seed(const GeneratorModel& gen, const State& w, const Move& base) {
  return mix_seed(hash_bytes(serialize_state(w) + "#" + move_template(base), kDefaultHashSeed), gen.rng_seed);
}

std::optional<Equation> wrong_claim(const GeneratorModel& gen, const State& w, const Move& base) {
  Equation truth = base.claim;
  Rng r(mistake_seed(gen, w, base));
  std::vector<std::string> slots;
  for (const auto& [v, a] : truth.coeffs) slots.push_back(v);
  slots.push_back("");  // the constant
  try {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Equation e = truth;
      const std::string& s = slots[r.below(slots.size())];
      Rational delta(r.bernoulli(0.5) ? 1 : -1);
      if (s.empty()) {
        e.constant += delta;
      } else {
        Rational next = e.coeff(s) + delta;
        if (next.is_zero()) continue;
        e.coeffs[s] = next;
      }
      if (e.canonical() != truth.canonical()) return e;
    }
  } catch (const OverflowError&) {
  }
  return std::nullopt;
}

const Move* pick_base(const GeneratorModel& gen, const std::vector<Move>& all, const std::vector<Move>& progress,
                      Rng& rng) {
  const std::vector<Move>& pool = (!progress.empty() && rng.bernoulli(gen.focus)) ? progress : all;
  if (pool.empty()) return nullptr;
  return &pool[rng.below(pool.size())];
}

Move malformed(const State& w, Rng& rng) {
  const std::size_t n = w.trace.size();
  std::size_t i = rng.below(n);
  const Equation& e = w.trace[i];
  std::string absent;
  for (const auto& v : w.scope)
    if (!e.has(v)) absent = v;
  std::string unbound;
  for (const auto& [v, a] : e.coeffs)
    if (!w.context.bindings.contains(v)) unbound = v;
  for (int attempt = 0; attempt < 16; ++attempt) {
    switch (rng.below(6)) {
      case 0: return make_move(Op::scale, {idx(n + rng.below(2)), Rational(2)}, e);
      case 1: return make_move(Op::scale, {idx(i), Rational(0)}, e);
      case 2:
        if (n >= 1) return make_move(Op::addmul, {idx(i), idx(i), Rational(1)}, e);
        break;
      case 3: return make_move(Op::isolate, {idx(i), std::string("q")}, e);
      case 4:
        if (!absent.empty()) return make_move(Op::isolate, {idx(i), absent}, e);
        break;
      case 5:
        if (!unbound.empty()) return make_move(Op::subst, {idx(i), unbound}, e);
        break;
    }
  }
  return make_move(Op::isolate, {idx(i), std::string("q")}, e);
}

// A claim the context gate must reject: a binding off by a nonzero amount
// when something is bound, otherwise a restated equation with a shifted
// constant.
std::optional<Move> contradicting(const State& w, const std::vector<Move>& all, Rng& rng) {
  if (!w.context.bindings.empty()) {
    auto it = std::next(w.context.bindings.begin(), rng.below(w.context.bindings.size()));
    std::vector<const Move*> targets;
    for (const auto& m : all)
      if (m.op == Op::isolate) targets.push_back(&m);
    if (targets.empty())
      for (const auto& m : all) targets.push_back(&m);
    if (!targets.empty()) {
      Move m = *targets[rng.below(targets.size())];
      Equation claim;
      claim.coeffs[it->first] = Rational(1);
      claim.constant = it->second + Rational(rng.bernoulli(0.5) ? 1 : -1) * Rational(1 + static_cast<int>(rng.below(3)));
      m.claim = claim;
      return m;
    }
  }
  std::size_t i = rng.below(w.trace.size());
  const Equation& e = w.trace[i];
  if (e.coeffs.empty()) return std::nullopt;
  Equation claim = e.scaled(Rational(1 + static_cast<int>(rng.below(2))));
  claim.constant += Rational(rng.bernoulli(0.5) ? 1 : -1);
  int c = 2 + static_cast<int>(rng.below(2));
  return make_move(Op::scale, {idx(i), Rational(c)}, claim);
}

}  // namespace

std::vector<Move> propose(const GeneratorModel& gen, const State& w, Rng& rng, int count, double noise_scale,
                          std::vector<CandidateKind>* kinds) {
  std::vector<Move> out;
  if (kinds) kinds->clear();
  if (count <= 0 || w.trace.empty()) return out;
  const std::vector<Move> all = applicable_moves(w);
  const std::vector<Move> progress = progress_moves(w);

  double err = (1.0 - gen.p_valid) * gen.noise_multiplier(w.depth) * noise_scale;
  err = std::clamp(err, 0.0, 1.0);
  double err_mass = gen.p_wrong_claim + gen.p_malformed + gen.p_contradict;
  std::vector<double> mix{1.0 - err, 0.0, 0.0, 0.0};
  if (err_mass > 0) {
    mix[1] = err * gen.p_wrong_claim / err_mass;
    mix[2] = err * gen.p_malformed / err_mass;
    mix[3] = err * gen.p_contradict / err_mass;
  } else {
    mix[0] = 1.0;
  }

  for (int k = 0; k < count; ++k) {
    auto kind = static_cast<CandidateKind>(rng.weighted(mix));
    std::optional<Move> m;
    switch (kind) {
      case CandidateKind::valid:
        if (const Move* b = pick_base(gen, all, progress, rng)) m = *b;
        break;
      case CandidateKind::wrong_claim:
        if (const Move* b = pick_base(gen, all, progress, rng)) {
          if (auto claim = wrong_claim(gen, w, *b)) {
            m = *b;
            m->claim = *claim;
          }
        }
        break;
      case CandidateKind::malformed:
        m = malformed(w, rng);
        break;
      case CandidateKind::contradict:
        try {
          m = contradicting(w, all, rng);
        } catch (const OverflowError&) {
        }
        break;
    }
    if (!m) {
      // nothing of that kind exists here; fall back to a malformed step
      kind = CandidateKind::malformed;
      m = malformed(w, rng);
    }
    out.push_back(std::move(*m));
    if (kinds) kinds->push_back(kind);
  }
  return out;
}

// ------------------------------------------------------------------ domain

LinsysDomain::LinsysDomain(const Problem& problem, const GeneratorModel& gen) : problem_(&problem), gen_(gen) {}

std::string LinsysDomain::id() const { return problem_->problem_id; }

State LinsysDomain::initial() const { return canonicalize(problem_->initial); }

std::vector<Move> LinsysDomain::propose(const State& s, Rng& rng, int count) const {
  return veriflow::propose(gen_, s, rng, count, problem_->noise_scale);
}

State LinsysDomain::apply(const State& s, const Move& m) const { return canonicalize(veriflow::apply(s, m)); }

std::optional<Rational> LinsysDomain::answer(const State& s) const {
  auto it = s.context.bindings.find(s.goal.target);
  if (it == s.context.bindings.end()) return std::nullopt;
  return it->second;
}

std::string LinsysDomain::goal_text() const { return problem_->initial.goal.str(); }

std::string LinsysDomain::precondition_key(const State& s) const {
  std::string key;
  for (const auto& eq : s.trace) {
    key += "[";
    bool first = true;
    for (const auto& [v, a] : eq.coeffs) {
      if (!first) key += ",";
      key += v;
      first = false;
    }
    key += "]";
  }
  key += "|";
  for (const auto& [v, val] : s.context.bindings) key += v + ";";
  return key;
}

std::optional<Move> LinsysDomain::instantiate(const std::string& tmpl, const State& s) const {
  if (tmpl.empty() || tmpl.back() != ')') return std::nullopt;
  Move m;
  try {
    m = parse_move(tmpl.substr(0, tmpl.size() - 1) + "|0=0)");
  } catch (const ParseError&) {
    return std::nullopt;
  }
  auto claim = recompute(s, m);
  if (!claim) return std::nullopt;
  m.claim = *claim;
  if (!changes_state(s, m)) return std::nullopt;
  return m;
}

}  // namespace veriflow

#pragma once
// Independent reference computations shared by the unit tests and the
// acceptance binary.
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "veriflow/core.hpp"
#include "veriflow/dag.hpp"
#include "veriflow/rng.hpp"
#include "veriflow/scorer.hpp"

namespace oracle {

inline Eigen::VectorXd gaussian(veriflow::Rng& rng, int n, double sd) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal() * sd;
  return v;
}

inline veriflow::ScoreInputs random_inputs(veriflow::Rng& rng, int dim) {
  veriflow::ScoreInputs in;
  in.x = gaussian(rng, 3 * dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  in.diff = gaussian(rng, dim, 0.5 / std::sqrt(static_cast<double>(dim)));
  in.cosine = rng.uniform() * 2.0;
  return in;
}

// Small network with every parameter tensor nonzero.
inline veriflow::ScorerParams random_params(veriflow::Rng& rng, veriflow::DistanceKind kind, int dim, int proj,
                                            int hidden) {
  auto p = veriflow::ScorerParams::untrained(kind, dim, proj, hidden, rng.next());
  p.W1 = Eigen::MatrixXd::NullaryExpr(hidden, 3 * dim, [&] { return rng.normal(); });
  p.b1 = gaussian(rng, hidden, 0.5);
  p.w2 = gaussian(rng, hidden, 1.0);
  p.b2 = rng.normal();
  return p;
}

inline Eigen::VectorXd central_difference(const std::function<double(const veriflow::ScorerParams&)>& f,
                                          const veriflow::ScorerParams& p, double step = 1e-5) {
  Eigen::VectorXd theta = p.flatten();
  Eigen::VectorXd g(theta.size());
  veriflow::ScorerParams q = p;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t[i] = theta[i] + step;
    q.unflatten(t);
    double up = f(q);
    t[i] = theta[i] - step;
    q.unflatten(t);
    double down = f(q);
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// Elementwise |a - n| / max(|a|, |n|, floor); the floor keeps entries whose
// true gradient is zero from dividing finite-difference noise by nothing.
inline double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric,
                                 double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

// Shortest valid path by dynamic programming in index order (edges always
// point to a higher index).
inline std::optional<int> dag_shortest(const veriflow::DagDomain& dag) {
  const int inf = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<std::size_t>(dag.nodes()), inf);
  dist[static_cast<std::size_t>(dag.start())] = 0;
  for (int u = 0; u < dag.nodes(); ++u) {
    if (dist[static_cast<std::size_t>(u)] == inf) continue;
    for (const auto& e : dag.edges())
      if (e.from == u && e.valid)
        dist[static_cast<std::size_t>(e.to)] = std::min(dist[static_cast<std::size_t>(e.to)], dist[static_cast<std::size_t>(u)] + 1);
  }
  int best = inf;
  for (int g : dag.goals()) best = std::min(best, dist[static_cast<std::size_t>(g)]);
  if (best == inf) return std::nullopt;
  return best;
}

// Verifier written against the move semantics directly: rebuild the expected
// coefficients term by term and compare with the claim up to sign.
inline bool claim_matches_impl(const veriflow::State& w, const veriflow::Move& m) {
  using veriflow::Equation;
  using veriflow::Rational;
  auto idx = [&](std::size_t k) -> std::optional<std::size_t> {
    const auto* r = std::get_if<Rational>(&m.args[k]);
    if (!r || !r->is_integer() || r->num() < 1 || r->num() > static_cast<std::int64_t>(w.trace.size()))
      return std::nullopt;
    return static_cast<std::size_t>(r->num() - 1);
  };
  if (m.args.size() != veriflow::op_arity(m.op)) return false;
  auto i = idx(0);
  if (!i) return false;
  const Equation& e = w.trace[*i];
  // coefficients of the expected equation, built term by term
  std::map<std::string, Rational> lhs;
  Rational rhs;
  auto add = [&](const Equation& src, Rational c) {
    for (const auto& [v, a] : src.coeffs) lhs[v] += a * c;
    rhs += src.constant * c;
  };
  switch (m.op) {
    case veriflow::Op::scale: {
      const auto* c = std::get_if<Rational>(&m.args[1]);
      if (!c || c->is_zero()) return false;
      add(e, *c);
      break;
    }
    case veriflow::Op::addmul: {
      auto j = idx(1);
      const auto* c = std::get_if<Rational>(&m.args[2]);
      if (!j || *j == *i || !c || c->is_zero()) return false;
      add(e, Rational(1));
      add(w.trace[*j], *c);
      break;
    }
    case veriflow::Op::isolate: {
      const auto* v = std::get_if<std::string>(&m.args[1]);
      if (!v || !w.in_scope(*v)) return false;
      auto it = e.coeffs.find(*v);
      if (it == e.coeffs.end()) return false;
      add(e, Rational(1) / it->second);
      break;
    }
    case veriflow::Op::subst: {
      const auto* v = std::get_if<std::string>(&m.args[1]);
      if (!v || !w.in_scope(*v) || !e.coeffs.contains(*v)) return false;
      auto b = w.context.bindings.find(*v);
      if (b == w.context.bindings.end()) return false;
      add(e, Rational(1));
      rhs -= lhs[*v] * b->second;
      lhs[*v] = Rational(0);
      break;
    }
  }
  std::erase_if(lhs, [](const auto& kv) { return kv.second.is_zero(); });
  for (int sign : {1, -1}) {
    Rational s(sign);
    bool same = m.claim.constant == rhs * s && m.claim.coeffs.size() == lhs.size();
    for (const auto& [v, a] : lhs) {
      auto it = m.claim.coeffs.find(v);
      same = same && it != m.claim.coeffs.end() && it->second == a * s;
    }
    if (same) return true;
  }
  return false;
}

inline bool claim_matches(const veriflow::State& w, const veriflow::Move& m) {
  try {
    return claim_matches_impl(w, m);
  } catch (const veriflow::OverflowError&) {
    return false;
  }
}

}  // namespace oracle

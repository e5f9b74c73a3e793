#include "veriflow/problem.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "veriflow/embed.hpp"
#include "veriflow/engine.hpp"

namespace veriflow {

using nlohmann::json;

void SizeParams::validate() const {
  if (vars_min < 2 || vars_max > 4 || vars_min > vars_max) throw std::invalid_argument("variables must lie in [2,4]");
  if (coef_max < 1 || coef_max > 5) throw std::invalid_argument("coef_max must lie in [1,5]");
  if (solution_max < 0) throw std::invalid_argument("solution_max must be >= 0");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
}

std::optional<std::map<std::string, Rational>> exact_solve(const std::vector<Equation>& trace,
                                                           const std::vector<std::string>& vars) {
  const std::size_t n = vars.size();
  if (trace.size() < n) return std::nullopt;
  std::vector<std::vector<Rational>> a(trace.size(), std::vector<Rational>(n + 1));
  for (std::size_t r = 0; r < trace.size(); ++r) {
    for (std::size_t c = 0; c < n; ++c) a[r][c] = trace[r].coeff(vars[c]);
    a[r][n] = trace[r].constant;
  }
  try {
    std::size_t row = 0;
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t p = row;
      while (p < a.size() && a[p][c].is_zero()) ++p;
      if (p == a.size()) return std::nullopt;
      std::swap(a[p], a[row]);
      Rational inv = a[row][c].reciprocal();
      for (auto& x : a[row]) x *= inv;
      for (std::size_t r = 0; r < a.size(); ++r) {
        if (r == row || a[r][c].is_zero()) continue;
        Rational f = a[r][c];
        for (std::size_t k = 0; k <= n; ++k) a[r][k] -= f * a[row][k];
      }
      ++row;
    }
    for (std::size_t r = n; r < a.size(); ++r)
      if (!a[r][n].is_zero()) return std::nullopt;
  } catch (const OverflowError&) {
    return std::nullopt;
  }
  std::map<std::string, Rational> out;
  for (std::size_t c = 0; c < n; ++c) out[vars[c]] = a[c][n];
  return out;
}

namespace {

Arg idx(std::size_t i) { return Rational(static_cast<std::int64_t>(i + 1)); }

// Applies op(args) with its exact claim; false when not applicable.
bool step(State& w, Op op, std::vector<Arg> args) {
  Move m{op, std::move(args), {}};
  auto claim = recompute(w, m);
  if (!claim) return false;
  m.claim = *claim;
  w = apply(w, m);
  return true;
}

}  // namespace

std::optional<int> constructive_steps(const State& start, int limit) {
  State w = start;
  int steps = 0;
  auto done = [&] { return goal_test(w, w.goal); };
  auto over = [&] { return steps > limit; };
  if (done()) return 0;

  // Forward elimination with the goal variable last, so the final pivot row
  // is a single-variable equation in the goal.
  std::vector<std::string> order;
  for (const auto& v : w.scope)
    if (v != w.goal.target) order.push_back(v);
  order.push_back(w.goal.target);

  std::vector<bool> used(w.trace.size(), false);
  try {
    for (const auto& v : order) {
      std::optional<std::size_t> pivot;
      for (std::size_t i = 0; i < w.trace.size(); ++i)
        if (!used[i] && w.trace[i].has(v)) {
          pivot = i;
          break;
        }
      if (!pivot) continue;
      used[*pivot] = true;
      if (v == w.goal.target) {
        if (w.trace[*pivot].arity() != 1) return std::nullopt;
        if (!step(w, Op::isolate, {idx(*pivot), v})) return std::nullopt;
        ++steps;
        return (done() && !over()) ? std::optional<int>(steps) : std::nullopt;
      }
      for (std::size_t i = 0; i < w.trace.size(); ++i) {
        if (used[i] || !w.trace[i].has(v)) continue;
        Rational c = -(w.trace[i].coeff(v) / w.trace[*pivot].coeff(v));
        if (!(c.is_integer() && c.abs() <= Rational(kMaxMultiplier))) {
          if (w.trace[*pivot].coeff(v) != Rational(1)) {
            if (!step(w, Op::isolate, {idx(*pivot), v})) return std::nullopt;
            ++steps;
          }
          c = -w.trace[i].coeff(v);
          if (!(c.is_integer() && c.abs() <= Rational(kMaxMultiplier))) {
            if (!step(w, Op::isolate, {idx(i), v})) return std::nullopt;
            ++steps;
            c = Rational(-1);
          }
        }
        if (!step(w, Op::addmul, {idx(i), idx(*pivot), c})) return std::nullopt;
        ++steps;
        if (over()) return std::nullopt;
      }
    }
  } catch (const OverflowError&) {
    return std::nullopt;
  }
  return std::nullopt;
}

Problem make_problem(std::string id, std::vector<Equation> trace, GoalSpec goal, std::uint64_t seed) {
  std::set<std::string> vars;
  for (const auto& eq : trace)
    for (const auto& [v, a] : eq.coeffs) vars.insert(v);
  vars.insert(goal.target);
  std::vector<std::string> scope(vars.begin(), vars.end());
  Problem p;
  p.problem_id = std::move(id);
  p.initial = canonicalize(make_state(trace, std::move(goal), scope, 0));
  auto sol = exact_solve(trace, scope);
  if (!sol) throw std::invalid_argument("problem has no unique solution");
  p.solution = std::move(*sol);
  p.gen_seed = seed;
  return p;
}

Problem gen_problem(std::uint64_t seed, const SizeParams& size) {
  size.validate();
  static const std::vector<std::string> names = {"x", "y", "z", "w"};
  Rng rng(mix_seed(seed, 0x9b));
  for (;;) {
    int n = size.vars_min + static_cast<int>(rng.below(static_cast<std::size_t>(size.vars_max - size.vars_min + 1)));
    std::vector<std::string> vars(names.begin(), names.begin() + n);
    std::vector<std::int64_t> sol(static_cast<std::size_t>(n));
    for (auto& s : sol) s = static_cast<std::int64_t>(rng.below(2 * size.solution_max + 1)) - size.solution_max;
    std::vector<Equation> trace;
    for (int r = 0; r < n; ++r) {
      Equation eq;
      std::int64_t rhs = 0;
      for (int c = 0; c < n; ++c) {
        std::int64_t a = static_cast<std::int64_t>(rng.below(2 * size.coef_max)) - size.coef_max;
        if (a >= 0) ++a;  // skip zero
        eq.coeffs[vars[static_cast<std::size_t>(c)]] = Rational(a);
        rhs += a * sol[static_cast<std::size_t>(c)];
      }
      eq.constant = Rational(rhs);
      trace.push_back(std::move(eq));
    }
    if (!exact_solve(trace, vars)) continue;
    GoalSpec goal{vars[rng.below(vars.size())], std::nullopt};
    if (!size.open_goal) goal.value = Rational(sol[static_cast<std::size_t>(
        std::find(vars.begin(), vars.end(), goal.target) - vars.begin())]);
    Problem p = make_problem("p" + std::to_string(seed), std::move(trace), std::move(goal), seed);
    if (!constructive_steps(p.initial, size.max_steps)) continue;
    return p;
  }
}

std::optional<int> bfs_min_steps(const State& start, std::size_t cap) {
  State root = canonicalize(start);
  if (goal_test(root, root.goal)) return 0;
  std::unordered_set<std::string> seen{serialize_state(root)};
  std::deque<std::pair<State, int>> queue;
  queue.emplace_back(std::move(root), 0);
  while (!queue.empty()) {
    auto [w, d] = std::move(queue.front());
    queue.pop_front();
    for (const Move& m : applicable_moves(w)) {
      State next = canonicalize(apply(w, m));
      if (!seen.insert(serialize_state(next)).second) continue;
      if (goal_test(next, next.goal)) return d + 1;
      if (seen.size() > cap) throw SearchCapExceeded("shortest-derivation search exceeded its state cap");
      queue.emplace_back(std::move(next), d + 1);
    }
  }
  return std::nullopt;
}

std::vector<int> quintile_bins(const std::vector<double>& pass_rate, const std::vector<std::string>& ids) {
  const std::size_t n = pass_rate.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pass_rate[a] != pass_rate[b]) return pass_rate[a] > pass_rate[b];
    return ids[a] < ids[b];
  });
  std::vector<int> bins(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) bins[order[pos]] = 1 + static_cast<int>(pos * 5 / n);
  return bins;
}

BinningResult bin_difficulty(const std::vector<Problem>& problems, const GeneratorModel& gen, int max_steps,
                             int samples, std::uint64_t seed) {
  if (problems.size() < 5) throw std::invalid_argument("difficulty binning needs at least 5 problems");
  BinningResult out;
  std::vector<std::string> ids;
  for (const auto& p : problems) {
    LinsysDomain dom(p, gen);
    Rng rng(mix_seed(seed, hash_bytes(p.problem_id, kDefaultHashSeed)));
    int pass = 0;
    for (int s = 0; s < samples; ++s) {
      auto r = greedy_rollout(dom, rng, max_steps);
      if (r.answer && *r.answer == p.true_answer()) ++pass;
    }
    out.pass_rate.push_back(samples > 0 ? static_cast<double>(pass) / samples : 0.0);
    ids.push_back(p.problem_id);
  }
  out.bins = quintile_bins(out.pass_rate, ids);
  return out;
}

// --------------------------------------------------------------------- io

json to_json(const Problem& p) {
  json sol = json::object();
  for (const auto& [v, val] : p.solution) sol[v] = val.str();
  return {{"problem_id", p.problem_id},
          {"state", serialize_state(p.initial)},
          {"scope", p.initial.scope},
          {"goal", p.initial.goal.str()},
          {"solution", sol},
          {"difficulty_bin", p.difficulty_bin},
          {"gen_seed", p.gen_seed},
          {"noise_scale", p.noise_scale}};
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.problem_id = j.at("problem_id").get<std::string>();
  p.initial = canonicalize(parse_state(j.at("state").get<std::string>(), j.at("scope").get<std::vector<std::string>>()));
  for (const auto& [v, val] : j.at("solution").items()) p.solution[v] = Rational::parse(val.get<std::string>());
  p.difficulty_bin = j.value("difficulty_bin", 0);
  p.gen_seed = j.value("gen_seed", std::uint64_t{0});
  p.noise_scale = j.value("noise_scale", 1.0);
  return p;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<Problem>& problems) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "corpus.jsonl", std::ios::binary);
  if (!index) throw std::runtime_error("cannot write " + (dir / "corpus.jsonl").string());
  for (const auto& p : problems) {
    std::string file = p.problem_id + ".json";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    out << to_json(p).dump(2) << "\n";
    json line{{"problem_id", p.problem_id},
              {"file", file},
              {"vars", p.initial.scope.size()},
              {"difficulty_bin", p.difficulty_bin},
              {"noise_scale", p.noise_scale}};
    index << line.dump() << "\n";
  }
}

std::vector<Problem> read_corpus(const std::filesystem::path& path) {
  std::filesystem::path index = std::filesystem::is_directory(path) ? path / "corpus.jsonl" : path;
  std::ifstream in(index, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + index.string());
  std::vector<Problem> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json entry = json::parse(line);
    std::ifstream pf(index.parent_path() / entry.at("file").get<std::string>(), std::ios::binary);
    if (!pf) throw std::runtime_error("cannot read problem file " + entry.at("file").get<std::string>());
    out.push_back(problem_from_json(json::parse(pf)));
  }
  return out;
}

}  // namespace veriflow

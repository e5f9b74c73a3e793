#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "veriflow/dag.hpp"
#include "veriflow/engine.hpp"
#include "veriflow/linsys.hpp"
#include "veriflow/problem.hpp"

using namespace veriflow;

namespace {

Problem p0() {
  return make_problem("p0", {parse_equation("x+y=3"), parse_equation("x-y=1")}, GoalSpec{"x", Rational(2)});
}

GeneratorModel only_valid() {
  GeneratorModel g;
  g.p_valid = 1.0;
  g.p_wrong_claim = 0.0;
  g.p_malformed = 0.0;
  g.p_contradict = 0.0;
  return g;
}

struct Logged {
  std::vector<nlohmann::json> lines;
  ExplorationSink sink() {
    return [this](const nlohmann::json& j) { lines.push_back(j); };
  }
};

template <class T>
std::vector<std::string> move_texts(const LinsysDomain& dom, const T& traj) {
  std::vector<std::string> out;
  for (const auto& [w, m] : traj.steps) out.push_back(dom.move_text(m));
  return out;
}

}  // namespace

TEST_CASE("verify_step is exact recomputation and costs one call") {
  Problem pr = p0();
  State w = pr.initial;
  w.remaining_budget = 5;
  LinsysDomain dom(pr, GeneratorModel{});
  CostLedger ledger;
  VerifierModel vm;
  Rng rng(0);
  CHECK(verify_step(dom, vm, rng, w, parse_move("addmul(1,2,1|2x=4)"), ledger) == 1);
  CHECK(ledger.verifier_calls == 1);
  CHECK(verify_step(dom, vm, rng, w, parse_move("addmul(1,2,1|2x=5)"), ledger) == 0);
  CHECK(ledger.verifier_calls == 2);
  CHECK(w.remaining_budget == 3);
  w.remaining_budget = 0;
  CHECK_THROWS_AS(verify_step(dom, vm, rng, w, parse_move("addmul(1,2,1|2x=4)"), ledger), BudgetExhausted);
  CHECK(ledger.verifier_calls == 2);
}

// P0's addmul claim 2x=4 is single-variable, so applying it already binds
// x=2 and the shortest derivation is one step.
TEST_CASE("P0 with a perfect proposer solves in the shortest derivation") {
  Problem pr = p0();
  LinsysDomain dom(pr, only_valid());
  AllocConfig acfg;
  auto params = ScorerParams::untrained();
  EngineConfig cfg;
  auto r = solve_gated(dom, params, cfg, acfg, VerifierModel{}, 0);
  CHECK(r.trajectory.solved());
  CHECK(*r.trajectory.final_answer == Rational(2));
  CHECK(r.ledger.verifier_calls <= 2 * acfg.k_max);
  CHECK(r.ledger.consistent());
  auto bfs = bfs_min_steps(pr.initial);
  REQUIRE(bfs.has_value());
  CHECK(*bfs == 1);
  CHECK(static_cast<int>(r.trajectory.length()) >= *bfs);
  CHECK(r.trajectory.length() <= 2);

  // the derivation spelled out move by move
  State w = pr.initial;
  Move m1 = parse_move("addmul(1,2,1|2x=4)");
  CHECK(gate_both(w, m1).passed);
  CHECK(exact_check(w, m1));
  State w1 = apply(w, m1);
  CHECK(goal_test(w1, pr.goal()));
}

TEST_CASE("zero budget exhausts immediately") {
  Problem pr = p0();
  LinsysDomain dom(pr, GeneratorModel{});
  EngineConfig cfg;
  cfg.budget_B = 0;
  auto r = solve_gated(dom, ScorerParams::untrained(), cfg, AllocConfig{}, VerifierModel{}, 0);
  CHECK(r.trajectory.outcome == Outcome::budget_exhausted);
  CHECK(r.ledger.verifier_calls == 0);
}

TEST_CASE("beta = 0 is trace-identical to the fixed-k configuration") {
  AllocConfig a;
  a.beta = 0.0;
  auto params = ScorerParams::untrained(DistanceKind::learned);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Problem pr = gen_problem(seed);
    LinsysDomain dom(pr, GeneratorModel{});
    EngineConfig full, fixed;
    full.policy = Policy::full;
    fixed.policy = Policy::gates_dtype_fixed_k;
    Logged lf, lx;
    auto sf = lf.sink(), sx = lx.sink();
    auto rf = solve_gated(dom, params, full, a, VerifierModel{}, seed, &sf);
    auto rx = solve_gated(dom, params, fixed, a, VerifierModel{}, seed, &sx);
    CHECK(move_texts(dom, rf.trajectory) == move_texts(dom, rx.trajectory));
    CHECK(rf.ledger.per_state_queries == rx.ledger.per_state_queries);
    REQUIRE(lf.lines.size() == lx.lines.size());
    for (std::size_t i = 0; i < lf.lines.size(); ++i) CHECK(lf.lines[i]["candidates"] == lx.lines[i]["candidates"]);
  }
}

TEST_CASE("engine invariants over seeded runs") {
  auto params = ScorerParams::untrained(DistanceKind::learned);
  VerifierModel noisy;
  noisy.fp_rate = 0.1;
  noisy.fn_rate = 0.1;
  for (Policy pol : {Policy::full, Policy::gates_only, Policy::gates_dtype_fixed_k, Policy::verify_all}) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Problem pr = gen_problem(1000 + seed);
      LinsysDomain dom(pr, GeneratorModel{});
      EngineConfig cfg;
      cfg.policy = pol;
      cfg.budget_B = 8 + static_cast<int>(seed % 5) * 12;
      for (const VerifierModel& vm : {VerifierModel{}, noisy}) {
        Logged log;
        auto sink = log.sink();
        auto r = solve_gated(dom, params, cfg, AllocConfig{}, vm, seed, &sink);
        CHECK(r.ledger.consistent());
        CHECK(r.ledger.verifier_calls <= cfg.budget_B);
        std::set<std::pair<std::string, std::string>> queried;
        long logged_queries = 0;
        for (const auto& line : log.lines) {
          for (const auto& c : line["candidates"]) {
            if (!c["queried"].get<bool>()) continue;
            ++logged_queries;
            if (pol != Policy::verify_all) CHECK(c["gate_reason"] == "ok");
            CHECK(c["eligible"].get<bool>());
            // a (state, move) pair is verified at most once per run
            INFO(policy_name(pol), " seed ", seed, " fp ", vm.fp_rate, " t ", line["t"], " ", c["move"]);
            CHECK(queried.emplace(line["state"], c["move"]).second);
          }
        }
        CHECK(logged_queries == r.ledger.verifier_calls);
        if (vm.fp_rate == 0.0)
          for (const auto& [w, m] : r.trajectory.steps) CHECK(exact_check(w, m));
      }
    }
  }
}

TEST_CASE("solve_gated is deterministic") {
  auto params = ScorerParams::untrained(DistanceKind::learned);
  Problem pr = gen_problem(77);
  LinsysDomain dom(pr, GeneratorModel{});
  Logged a, b;
  auto sa = a.sink(), sb = b.sink();
  auto ra = solve_gated(dom, params, EngineConfig{}, AllocConfig{}, VerifierModel{}, 5, &sa);
  auto rb = solve_gated(dom, params, EngineConfig{}, AllocConfig{}, VerifierModel{}, 5, &sb);
  CHECK(move_texts(dom, ra.trajectory) == move_texts(dom, rb.trajectory));
  CHECK(ra.ledger.per_state_queries == rb.ledger.per_state_queries);
  REQUIRE(a.lines.size() == b.lines.size());
  for (std::size_t i = 0; i < a.lines.size(); ++i) CHECK(a.lines[i].dump() == b.lines[i].dump());
}

TEST_CASE("exhaustive search on DAGs agrees with the shortest-path oracle") {
  EngineConfig cfg;
  cfg.policy = Policy::gates_only;
  cfg.budget_B = 1 << 20;
  cfg.max_steps = 64;
  cfg.max_decisions = 1 << 20;
  auto params = ScorerParams::untrained();
  int reachable = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DagDomain dag = DagDomain::random(seed);
    auto oracle_len = oracle::dag_shortest(dag);
    CHECK(bfs_min_steps(dag) == oracle_len);
    auto r = solve_gated(dag, params, cfg, AllocConfig{}, VerifierModel{}, seed);
    CHECK(r.trajectory.solved() == oracle_len.has_value());
    if (oracle_len) {
      ++reachable;
      CHECK(static_cast<int>(r.trajectory.length()) >= *oracle_len);
    }
  }
  CHECK(reachable > 10);
  CHECK(reachable < 100);
}

TEST_CASE("move cache") {
  MoveCache cache;
  CHECK(cache.lookup("k").empty());
  cache.insert("k", "isolate(1,x)");
  cache.insert("k", "scale(1,2)");
  cache.insert("k", "scale(1,2)");
  CHECK(cache.size() == 2);
  CHECK(cache.lookup("k", 1) == std::vector<std::string>{"isolate(1,x)"});
  // the entry just returned now has more hits
  CHECK(cache.lookup("k", 1) == std::vector<std::string>{"isolate(1,x)"});
  CHECK(cache.lookup("k") == std::vector<std::string>{"isolate(1,x)", "scale(1,2)"});
  CHECK(cache.lookup("k", 0).empty());
  CHECK(cache.lookup("other").empty());
}

TEST_CASE("a verified template is retrieved on an identical state and still gated") {
  Problem pr = p0();
  LinsysDomain dom(pr, only_valid());
  MoveCache shared;
  auto params = ScorerParams::untrained();
  solve_gated(dom, params, EngineConfig{}, AllocConfig{}, VerifierModel{}, 0, nullptr, &shared);
  CHECK(shared.size() > 0);
  auto keyed = shared.lookup(dom.precondition_key(dom.initial()));
  CHECK_FALSE(keyed.empty());

  // a proposer that only makes wrong claims: any progress must come from the cache
  GeneratorModel wrong = only_valid();
  wrong.p_valid = 0.0;
  wrong.p_wrong_claim = 1.0;
  LinsysDomain dom2(pr, wrong);
  Logged log;
  auto sink = log.sink();
  auto r = solve_gated(dom2, params, EngineConfig{}, AllocConfig{}, VerifierModel{}, 1, &sink, &shared);
  int retrieved = 0, retrieved_queried = 0;
  for (const auto& line : log.lines)
    for (const auto& c : line["candidates"])
      if (c["retrieved"].get<bool>()) {
        ++retrieved;
        CHECK(c["eligible"].get<bool>() == (c["gate_reason"] == "ok"));
        retrieved_queried += c["queried"].get<bool>();
      }
  CHECK(retrieved > 0);
  CHECK(retrieved_queried > 0);
  CHECK(r.trajectory.solved());
  for (const auto& [w, m] : r.trajectory.steps) CHECK(exact_check(w, m));
}

TEST_CASE("weighted and plurality votes") {
  std::vector<std::pair<std::optional<Rational>, double>> s{
      {Rational(2), 0.9}, {Rational(2), 0.8}, {Rational(5), 0.95}};
  CHECK(*weighted_vote(s) == Rational(2));
  CHECK(*plurality_vote({Rational(2), Rational(2), Rational(5)}) == Rational(2));
  CHECK(*plurality_vote({Rational(7)}) == Rational(7));
  CHECK(*plurality_vote({Rational(5), Rational(2), Rational(2)}) == Rational(2));
  CHECK_FALSE(plurality_vote({std::nullopt, std::nullopt}).has_value());
  // one correct rollout among wrong ones wins under a noiseless solution score
  Rng rng(0);
  std::vector<std::pair<std::optional<Rational>, double>> t{
      {Rational(3), solution_score(1, 3, 0.0, rng)}, {Rational(2), solution_score(3, 3, 0.0, rng)}};
  CHECK(*weighted_vote(t) == Rational(2));
}

TEST_CASE("baseline ledgers") {
  Problem pr = gen_problem(3);
  LinsysDomain dom(pr, GeneratorModel{});
  auto one = solve_best_of_n(dom, 1, VerifierModel{}, 16, 9);
  CHECK(one.ledger.verifier_calls == 1);
  Rng rng(detail::stream_seed(9, 1));
  CHECK(one.answer == greedy_rollout(dom, rng, 16).answer);

  auto maj = solve_majority(dom, 16, 16, 9);
  CHECK(maj.ledger.verifier_calls == 0);
  CHECK(maj.ledger.generation_calls == 16);
  auto maj1 = solve_majority(dom, 1, 16, 9);
  Rng rng2(detail::stream_seed(9, 1));
  CHECK(maj1.answer == greedy_rollout(dom, rng2, 16).answer);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto beam = solve_beam(dom, 4, 64, VerifierModel{}, 16, seed);
    CHECK(beam.ledger.consistent());
    long expansions = 0;
    for (int q : beam.ledger.per_state_queries) expansions += q;
    CHECK(beam.ledger.verifier_calls == expansions);
  }
  CHECK_THROWS_AS(solve_beam(dom, 5, 4, VerifierModel{}, 16, 0), std::invalid_argument);
}

TEST_CASE("beam of width one with one proposal is a greedy verified rollout") {
  Problem pr = p0();
  LinsysDomain dom(pr, only_valid());
  auto r = solve_beam(dom, 1, 1, VerifierModel{}, 16, 0);
  CHECK(r.answer == std::optional<Rational>(Rational(2)));
  for (int q : r.ledger.per_state_queries) CHECK(q == 1);
}

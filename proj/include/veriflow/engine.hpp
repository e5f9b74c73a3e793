#pragma once

// Gated competition with state-conditional verification, plus the baseline
// policies it is compared against. The solve loop is generic over a
// SearchDomain so the same code runs the linear-system domain and the
// explicit-DAG oracle domain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "veriflow/alloc.hpp"
#include "veriflow/core.hpp"
#include "veriflow/embed.hpp"
#include "veriflow/gates.hpp"
#include "veriflow/rng.hpp"
#include "veriflow/scorer.hpp"

namespace veriflow {

enum class Policy { full, gates_only, gates_dtype_fixed_k, verify_all, best_of_n, majority, beam };

std::string_view policy_name(Policy p);
Policy policy_from_name(std::string_view name);
bool is_gated_family(Policy p);  // policies run by solve_gated

struct BudgetExhausted : std::runtime_error {
  BudgetExhausted() : std::runtime_error("verifier budget exhausted") {}
};

struct CostLedger {
  long verifier_calls = 0;
  long generation_calls = 0;
  std::vector<int> per_state_queries;  // |Q(w_t)| in visit order

  void record_queries(int n) { per_state_queries.push_back(n); }
  long query_sum() const;
  // verifier_calls == sum of per-state query sizes
  bool consistent() const { return query_sum() == verifier_calls; }
};

struct EngineConfig {
  int budget_B = 64;
  int max_steps = 16;  // committed-move depth limit (also the backtracking limit)
  int retry_limit = 2;
  bool backtrack = true;
  Policy policy = Policy::full;
  int n_samples = 64;   // N for best-of-N / majority / beam
  int beam_width = 4;   // b
  int max_decisions = 400;
  bool retrieval = true;
  int retrieve_limit = 2;  // most-used cached templates offered per state

  void validate() const;
};

struct VerifierModel {
  double fp_rate = 0.0;  // probability a rejected step is reported accepted
  double fn_rate = 0.0;  // probability an accepted step is reported rejected
  double solution_score_noise = 0.15;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Verified (op,args) templates keyed by a context precondition. Only
// verifier-accepted moves are ever inserted.
class MoveCache {
 public:
  struct Entry {
    std::string move_template;
    long hits = 0;
  };

  void insert(const std::string& key, const std::string& move_template);
  // Up to `limit` templates under `key`, most-hit first (ties by insertion
  // order); each returned template's hit count is bumped.
  std::vector<std::string> lookup(const std::string& key, std::size_t limit = SIZE_MAX);
  std::size_t size() const;
  const std::map<std::string, std::vector<Entry>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<Entry>> entries_;
};

// What the engine needs from a task domain.
template <class D>
concept SearchDomain = requires(const D& d, typename D::State& ws, const typename D::State& s,
                                const typename D::Move& m, Rng& rng, const std::string& text) {
  { ws.remaining_budget } -> std::convertible_to<int>;
  { d.id() } -> std::convertible_to<std::string>;
  { d.initial() } -> std::same_as<typename D::State>;
  { d.propose(s, rng, 1) } -> std::same_as<std::vector<typename D::Move>>;
  { d.candidates_per_state() } -> std::convertible_to<int>;
  { d.gate(s, m) } -> std::same_as<GateReport>;
  { d.check(s, m) } -> std::same_as<bool>;
  { d.apply(s, m) } -> std::same_as<typename D::State>;
  { d.is_goal(s) } -> std::same_as<bool>;
  { d.answer(s) } -> std::same_as<std::optional<Rational>>;
  { d.depth(s) } -> std::convertible_to<int>;
  { d.state_text(s) } -> std::convertible_to<std::string>;
  { d.move_text(m) } -> std::convertible_to<std::string>;
  { d.goal_text() } -> std::convertible_to<std::string>;
  { d.precondition_key(s) } -> std::convertible_to<std::string>;
  { d.move_template(m) } -> std::convertible_to<std::string>;
  { d.instantiate(text, s) } -> std::same_as<std::optional<typename D::Move>>;
};

template <class D>
struct SolveResult {
  BasicTrajectory<typename D::State, typename D::Move> trajectory;
  CostLedger ledger;
  long decisions = 0;
};

using ExplorationSink = std::function<void(const nlohmann::json&)>;

// One step-level verifier call: exact check with optional flip noise.
// Decrements w.remaining_budget and bumps the ledger; throws
// BudgetExhausted when nothing is left.
template <SearchDomain D>
int verify_step(const D& domain, const VerifierModel& vm, Rng& rng, typename D::State& w,
                const typename D::Move& m, CostLedger& ledger) {
  if (w.remaining_budget <= 0) throw BudgetExhausted();
  bool ok = domain.check(w, m);
  double u = rng.uniform();
  if (ok && u < vm.fn_rate) ok = false;
  if (!ok && u < vm.fp_rate) ok = true;
  --w.remaining_budget;
  ++ledger.verifier_calls;
  return ok ? 1 : 0;
}

namespace detail {

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return mix_seed(seed, stream); }

class EmbeddingCache {
 public:
  explicit EmbeddingCache(const ScorerParams& p) : p_(p) {}
  const Embedding& operator()(const std::string& text, SourceKind kind) {
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(text, embed(text, p_.dim, p_.hash_seed, kind)).first->second;
  }

 private:
  const ScorerParams& p_;
  std::unordered_map<std::string, Embedding> cache_;
};

}  // namespace detail

// Algorithm: at each visited state, propose (plus retrieve), gate, score
// every survivor with h, verify the top k_t in score order, commit the
// accepted move with the lowest h (ties by move text). With no acceptance,
// verify the next-ranked batch (or re-propose once the ranked list is used
// up) up to retry_limit times, then backtrack one level and blacklist the
// commitment that led here. Candidates leading to an already visited state
// are never verified.
//
// Policy variants share this loop:
//   full                 gates, h = D_type + r, adaptive k
//   gates_dtype_fixed_k  gates, h from params, k = k_base
//   gates_only           gates, no scoring, every survivor verified
//   verify_all           no gates, no scoring, every candidate verified
// Unscored policies rank and commit in proposal order.
template <SearchDomain D>
SolveResult<D> solve_gated(const D& domain, const ScorerParams& params, const EngineConfig& cfg,
                           const AllocConfig& acfg, const VerifierModel& vm, std::uint64_t seed,
                           const ExplorationSink* sink = nullptr, MoveCache* shared_cache = nullptr) {
  using State = typename D::State;
  using Move = typename D::Move;

  const bool use_gates = cfg.policy != Policy::verify_all;
  const bool scored = cfg.policy == Policy::full || cfg.policy == Policy::gates_dtype_fixed_k;
  if (!is_gated_family(cfg.policy)) throw std::invalid_argument("solve_gated: not a gated-family policy");

  struct Candidate {
    Move move;
    std::string text;
    GateReport gate;
    bool eligible = false;
    bool retrieved = false;
    double h = 0.0;
    int label = -1;  // -1 not yet verified
    bool blacklisted = false;
    std::size_t order = 0;
    std::string post;  // serialized successor; empty when apply rejects the move
  };
  struct Frame {
    State state;
    std::string text;
    bool opened = false;
    std::vector<Candidate> pool;
    std::set<std::string> seen;
    int k = 0;
    double sigma = 0.0;
    int failed_attempts = 0;
    std::optional<std::size_t> committed;
  };

  SolveResult<D> result;
  CostLedger& ledger = result.ledger;
  Rng gen_rng(detail::stream_seed(seed, 1));
  Rng ver_rng(detail::stream_seed(seed, 2));
  AllocState alloc;
  MoveCache local_cache;
  MoveCache& cache = shared_cache ? *shared_cache : local_cache;
  detail::EmbeddingCache emb(params);
  const std::string goal_text = domain.goal_text();
  int remaining = std::max(0, cfg.budget_B);

  std::vector<Frame> frames;
  frames.push_back(Frame{domain.initial(), {}, false, {}, {}, 0, 0.0, 0, std::nullopt});
  frames.back().state.remaining_budget = remaining;
  frames.back().text = domain.state_text(frames.back().state);
  std::set<std::string> visited{frames.back().text};

  auto add_candidates = [&](Frame& f, std::vector<Move> moves, bool retrieved) {
    for (auto& m : moves) {
      std::string text = domain.move_text(m);
      if (!f.seen.insert(text).second) continue;
      Candidate c{std::move(m), std::move(text), {}, false, retrieved, 0.0, -1, false, f.pool.size(), {}};
      c.gate = domain.gate(f.state, c.move);
      c.eligible = use_gates ? c.gate.passed : true;
      try {
        c.post = domain.state_text(domain.apply(f.state, c.move));
      } catch (const std::exception&) {
        // not applicable; only a noisy verifier could accept it
      }
      if (c.gate.passed && c.eligible && scored) {
        ScoreInputs in = featurize(emb(f.text, SourceKind::state), emb(c.text, SourceKind::move),
                                   emb(goal_text, SourceKind::goal), emb(c.post, SourceKind::state));
        c.h = hybrid_score(params, in);
      }
      f.pool.push_back(std::move(c));
    }
  };

  // a candidate leading to an already visited state is never queried or committed
  auto usable = [&](const Candidate& c) { return !c.blacklisted && !(!c.post.empty() && visited.contains(c.post)); };
  auto eligible_unqueried = [&](const Frame& f) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < f.pool.size(); ++i)
      if (f.pool[i].eligible && f.pool[i].label < 0 && usable(f.pool[i])) idx.push_back(i);
    if (scored)
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (f.pool[a].h != f.pool[b].h) return f.pool[a].h < f.pool[b].h;
        return f.pool[a].text < f.pool[b].text;
      });
    return idx;
  };

  auto set_k = [&](Frame& f) {
    std::vector<double> hs;
    for (const auto& c : f.pool)
      if (c.eligible && c.label < 0 && usable(c)) hs.push_back(c.h);
    f.sigma = hs.empty() ? 0.0 : std::sqrt(score_variance(hs));
    switch (cfg.policy) {
      case Policy::full:
        alloc = update_sigma_bar(alloc, f.sigma, acfg);
        f.k = k_of_w(acfg, alloc, f.sigma);
        break;
      case Policy::gates_dtype_fixed_k:
        f.k = acfg.k_base;
        break;
      default:
        f.k = static_cast<int>(hs.size());
        break;
    }
  };

  auto open = [&](Frame& f) {
    std::vector<Move> moves = domain.propose(f.state, gen_rng, domain.candidates_per_state());
    ++ledger.generation_calls;
    std::vector<Move> retrieved;
    if (cfg.retrieval) {
      for (const auto& tmpl :
           cache.lookup(domain.precondition_key(f.state), static_cast<std::size_t>(std::max(0, cfg.retrieve_limit))))
        if (auto m = domain.instantiate(tmpl, f.state)) retrieved.push_back(std::move(*m));
    }
    add_candidates(f, std::move(moves), false);
    add_candidates(f, std::move(retrieved), true);
    f.opened = true;
    set_k(f);
  };

  auto best_accepted = [&](const Frame& f) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < f.pool.size(); ++i) {
      const auto& c = f.pool[i];
      if (c.label != 1 || !usable(c)) continue;
      if (!best) {
        best = i;
        continue;
      }
      const auto& b = f.pool[*best];
      bool better = scored ? (c.h < b.h || (c.h == b.h && c.text < b.text)) : c.order < b.order;
      if (better) best = i;
    }
    return best;
  };

  auto backtrack = [&]() -> bool {
    if (!cfg.backtrack || frames.size() <= 1) return false;
    frames.pop_back();
    Frame& parent = frames.back();
    if (parent.committed) parent.pool[*parent.committed].blacklisted = true;
    parent.committed.reset();
    return true;
  };

  Outcome outcome = Outcome::dead_end;
  while (true) {
    Frame& f = frames.back();
    f.state.remaining_budget = remaining;
    if (domain.is_goal(f.state)) {
      outcome = Outcome::solved;
      break;
    }
    if (result.decisions >= cfg.max_decisions) {
      outcome = Outcome::step_limit;
      break;
    }
    if (domain.depth(f.state) >= cfg.max_steps) {
      if (!backtrack()) {
        outcome = Outcome::step_limit;
        break;
      }
      continue;
    }

    std::optional<std::size_t> best = best_accepted(f);
    if (!best) {
      if (remaining <= 0) {
        outcome = Outcome::budget_exhausted;
        break;
      }
      if (!f.opened) open(f);
      if (f.failed_attempts > cfg.retry_limit) {
        if (!backtrack()) break;
        continue;
      }
      std::vector<std::size_t> ranked = eligible_unqueried(f);
      if (ranked.empty()) {
        // Ranked list used up: a retry re-proposes at this state.
        ++f.failed_attempts;
        if (f.failed_attempts > cfg.retry_limit) continue;
        open(f);
        continue;
      }
      int k_t = std::min({f.k, static_cast<int>(ranked.size()), remaining});
      k_t = std::max(k_t, 1);
      ranked.resize(static_cast<std::size_t>(k_t));
      int accepted = 0;
      for (std::size_t i : ranked) {
        Candidate& c = f.pool[i];
        c.label = verify_step(domain, vm, ver_rng, f.state, c.move, ledger);
        --remaining;
        if (c.label == 1) {
          ++accepted;
          cache.insert(domain.precondition_key(f.state), domain.move_template(c.move));
        }
      }
      ledger.record_queries(k_t);
      ++result.decisions;
      best = best_accepted(f);
      if (sink) {
        nlohmann::json cands = nlohmann::json::array();
        std::set<std::size_t> now(ranked.begin(), ranked.end());
        for (std::size_t i = 0; i < f.pool.size(); ++i) {
          const auto& c = f.pool[i];
          nlohmann::json jc{{"move", c.text},
                            {"gate_reason", std::string(gate_code_name(c.gate.code))},
                            {"eligible", c.eligible},
                            {"retrieved", c.retrieved},
                            {"h", c.h},
                            {"queried", now.contains(i)}};
          jc["label"] = c.label < 0 ? nlohmann::json(nullptr) : nlohmann::json(c.label);
          if (c.eligible && c.gate.passed) jc["post"] = c.post;
          cands.push_back(std::move(jc));
        }
        nlohmann::json line{{"problem_id", domain.id()},
                            {"t", result.decisions - 1},
                            {"depth", domain.depth(f.state)},
                            {"state", f.text},
                            {"goal", goal_text},
                            {"k_t", k_t},
                            {"sigma", f.sigma},
                            {"sigma_bar", alloc.sigma_bar},
                            {"remaining_budget", remaining},
                            {"candidates", std::move(cands)}};
        line["committed"] = best ? nlohmann::json(f.pool[*best].text) : nlohmann::json(nullptr);
        (*sink)(line);
      }
      if (!accepted && !best) {
        ++f.failed_attempts;
        continue;
      }
      if (!best) continue;
    }

    // commit
    Candidate& chosen = f.pool[*best];
    State child;
    try {
      child = domain.apply(f.state, chosen.move);
    } catch (const StructuralError&) {
      chosen.blacklisted = true;  // accepted by a noisy verifier but not applicable
      continue;
    }
    f.committed = *best;
    child.remaining_budget = remaining;
    Frame next{std::move(child), {}, false, {}, {}, 0, 0.0, 0, std::nullopt};
    next.text = domain.state_text(next.state);
    visited.insert(next.text);
    frames.push_back(std::move(next));
  }

  auto& traj = result.trajectory;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i)
    traj.steps.emplace_back(frames[i].state, frames[i].pool[*frames[i].committed].move);
  traj.final_state = frames.back().state;
  traj.outcome = outcome;
  if (outcome == Outcome::solved) traj.final_answer = domain.answer(traj.final_state);
  return result;
}

// ------------------------------------------------------------- baselines

struct BaselineResult {
  std::optional<Rational> answer;
  CostLedger ledger;
};

template <class S>
struct Rollout {
  std::optional<Rational> answer;
  int steps = 0;
  int correct_steps = 0;
  S final_state{};
};

// Unverified greedy rollout: at each state take the first proposed move
// that passes the deterministic gates (ungated moves cannot be applied).
template <SearchDomain D>
Rollout<typename D::State> greedy_rollout(const D& domain, Rng& rng, int max_steps) {
  Rollout<typename D::State> r;
  auto w = domain.initial();
  while (!domain.is_goal(w) && domain.depth(w) < max_steps) {
    auto moves = domain.propose(w, rng, domain.candidates_per_state());
    const typename D::Move* pick = nullptr;
    for (const auto& m : moves)
      if (domain.gate(w, m).passed) {
        pick = &m;
        break;
      }
    if (!pick) break;
    r.correct_steps += domain.check(w, *pick) ? 1 : 0;
    ++r.steps;
    w = domain.apply(w, *pick);
  }
  if (domain.is_goal(w)) r.answer = domain.answer(w);
  r.final_state = w;
  return r;
}

// Sum of scores per distinct answer; argmax, ties to the earliest sample.
// Samples without an answer are ignored.
std::optional<Rational> weighted_vote(const std::vector<std::pair<std::optional<Rational>, double>>& samples);
// Most frequent answer, ties to the earliest sample.
std::optional<Rational> plurality_vote(const std::vector<std::optional<Rational>>& answers);

// Solution-level score: fraction of exactly recomputing steps plus Gaussian
// noise, clipped to [0,1].
double solution_score(int correct_steps, int steps, double noise_sd, Rng& rng);

template <SearchDomain D>
BaselineResult solve_best_of_n(const D& domain, int n, const VerifierModel& vm, int max_steps, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("best-of-N needs N >= 1");
  BaselineResult out;
  Rng gen_rng(detail::stream_seed(seed, 1));
  Rng ver_rng(detail::stream_seed(seed, 2));
  std::vector<std::pair<std::optional<Rational>, double>> samples;
  for (int i = 0; i < n; ++i) {
    auto r = greedy_rollout(domain, gen_rng, max_steps);
    ++out.ledger.generation_calls;
    double score = solution_score(r.correct_steps, r.steps, vm.solution_score_noise, ver_rng);
    ++out.ledger.verifier_calls;
    out.ledger.record_queries(1);
    samples.emplace_back(r.answer, score);
  }
  out.answer = weighted_vote(samples);
  return out;
}

template <SearchDomain D>
BaselineResult solve_majority(const D& domain, int n, int max_steps, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("majority vote needs N >= 1");
  BaselineResult out;
  Rng gen_rng(detail::stream_seed(seed, 1));
  std::vector<std::optional<Rational>> answers;
  for (int i = 0; i < n; ++i) {
    answers.push_back(greedy_rollout(domain, gen_rng, max_steps).answer);
    ++out.ledger.generation_calls;
  }
  out.answer = plurality_vote(answers);
  return out;
}

// Beam of width b. Each layer expands every beam state with ceil(N/b)
// proposals; every expansion costs one verifier call and receives a
// process-style score (step label plus solution-score noise, clipped). The
// top b applicable expansions by score survive.
template <SearchDomain D>
BaselineResult solve_beam(const D& domain, int b, int n, const VerifierModel& vm, int max_steps, std::uint64_t seed) {
  if (b < 1 || n < b) throw std::invalid_argument("beam search needs b >= 1 and N >= b");
  using State = typename D::State;
  BaselineResult out;
  Rng gen_rng(detail::stream_seed(seed, 1));
  Rng ver_rng(detail::stream_seed(seed, 2));
  const int per_state = (n + b - 1) / b;

  struct Entry {
    State state;
    double score;
    std::size_t parent;
    std::string text;
  };
  std::vector<Entry> beam{{domain.initial(), 1.0, 0, ""}};
  for (int layer = 0;; ++layer) {
    for (const auto& e : beam)
      if (domain.is_goal(e.state)) {
        out.answer = domain.answer(e.state);
        return out;
      }
    if (layer >= max_steps || beam.empty()) return out;
    std::vector<Entry> expansions;
    for (std::size_t bi = 0; bi < beam.size(); ++bi) {
      State w = beam[bi].state;
      w.remaining_budget = 1 << 30;
      auto moves = domain.propose(w, gen_rng, per_state);
      ++out.ledger.generation_calls;
      for (const auto& m : moves) {
        int y = verify_step(domain, vm, ver_rng, w, m, out.ledger);
        double score = std::clamp(y + vm.solution_score_noise * ver_rng.normal(), 0.0, 1.0);
        if (!domain.gate(w, m).passed) continue;
        expansions.push_back({domain.apply(beam[bi].state, m), score, bi, domain.move_text(m)});
      }
      out.ledger.record_queries(static_cast<int>(moves.size()));
    }
    std::stable_sort(expansions.begin(), expansions.end(), [](const Entry& a, const Entry& c) {
      if (a.score != c.score) return a.score > c.score;
      if (a.parent != c.parent) return a.parent < c.parent;
      return a.text < c.text;
    });
    std::vector<Entry> next;
    std::set<std::string> kept;
    for (auto& e : expansions) {
      if (static_cast<int>(next.size()) >= b) break;
      if (!kept.insert(domain.state_text(e.state)).second) continue;
      next.push_back(std::move(e));
    }
    beam = std::move(next);
  }
}

}  // namespace veriflow

#include "veriflow/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "veriflow/embed.hpp"
#include "veriflow/linsys.hpp"

namespace veriflow {

using nlohmann::json;

std::uint64_t problem_seed(std::uint64_t seed, const std::string& problem_id) {
  return mix_seed(seed, hash_bytes(problem_id, kDefaultHashSeed));
}

json RunSummary::to_json() const {
  return {{"problem_id", problem_id},
          {"policy", policy},
          {"budget", budget},
          {"seed", seed},
          {"outcome", outcome},
          {"answer", answer ? json(answer->str()) : json(nullptr)},
          {"correct", correct},
          {"verifier_calls", verifier_calls},
          {"generation_calls", generation_calls},
          {"steps", steps}};
}

namespace {

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t t = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, hw);
  t = std::min(t, n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t k = 0; k < t; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

RunSummary run_policy(const Problem& problem, Policy policy, int budget, std::uint64_t seed, const RunConfig& cfg,
                      const ScorerParams& params, const std::string& label) {
  RunSummary s;
  s.problem_id = problem.problem_id;
  s.policy = label.empty() ? std::string(policy_name(policy)) : label;
  s.budget = budget;
  s.seed = seed;
  LinsysDomain dom(problem, cfg.gen);
  const std::uint64_t ps = problem_seed(seed, problem.problem_id);
  CostLedger ledger;
  std::optional<Rational> answer;

  if (is_gated_family(policy)) {
    EngineConfig e = cfg.engine;
    e.policy = policy;
    e.budget_B = budget;
    auto r = solve_gated(dom, params, e, cfg.alloc, cfg.verifier, ps);
    ledger = r.ledger;
    answer = r.trajectory.final_answer;
    s.outcome = outcome_name(r.trajectory.outcome);
    s.steps = static_cast<int>(r.trajectory.length());
    s.within_budget = ledger.verifier_calls <= budget;
  } else {
    BaselineResult r;
    switch (policy) {
      case Policy::best_of_n:
        r = solve_best_of_n(dom, budget, cfg.verifier, cfg.engine.max_steps, ps);
        s.within_budget = r.ledger.verifier_calls <= budget;
        break;
      case Policy::majority:
        r = solve_majority(dom, budget, cfg.engine.max_steps, ps);
        break;
      case Policy::beam:
        r = solve_beam(dom, std::min(cfg.engine.beam_width, budget), budget, cfg.verifier, cfg.engine.max_steps, ps);
        break;
      default:
        throw std::logic_error("unhandled policy");
    }
    ledger = r.ledger;
    answer = r.answer;
    s.outcome = answer ? "answered" : "no_answer";
  }
  s.answer = answer;
  s.correct = answer && *answer == problem.true_answer();
  s.verifier_calls = ledger.verifier_calls;
  s.generation_calls = ledger.generation_calls;
  s.ledger_consistent = ledger.consistent();
  return s;
}

ResultRow aggregate(const std::string& policy, int budget, std::uint64_t seed, const std::vector<Problem>& problems,
                    const std::vector<RunSummary>& runs) {
  ResultRow row;
  row.policy = policy;
  row.budget = budget;
  row.seed = seed;
  row.problems = static_cast<int>(runs.size());
  std::array<int, 5> bin_correct{};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    row.accuracy += r.correct ? 1.0 : 0.0;
    row.mean_verifier_calls += static_cast<double>(r.verifier_calls);
    row.mean_generation_calls += static_cast<double>(r.generation_calls);
    row.ledger_ok = row.ledger_ok && r.ledger_consistent && r.within_budget;
    int bin = problems[i].difficulty_bin;
    if (bin >= 1 && bin <= 5) {
      ++row.bin_count[static_cast<std::size_t>(bin - 1)];
      bin_correct[static_cast<std::size_t>(bin - 1)] += r.correct ? 1 : 0;
    }
  }
  if (!runs.empty()) {
    double n = static_cast<double>(runs.size());
    row.accuracy /= n;
    row.mean_verifier_calls /= n;
    row.mean_generation_calls /= n;
  }
  for (std::size_t b = 0; b < 5; ++b)
    row.bin_accuracy[b] = row.bin_count[b] ? static_cast<double>(bin_correct[b]) / row.bin_count[b] : 0.0;
  return row;
}

namespace {

std::vector<RunSummary> run_cell(const std::vector<Problem>& problems, Policy policy, int budget, std::uint64_t seed,
                                 const RunConfig& cfg, const ScorerParams& params, const std::string& label) {
  std::vector<RunSummary> out(problems.size());
  parallel_for(problems.size(), cfg.threads,
               [&](std::size_t i) { out[i] = run_policy(problems[i], policy, budget, seed, cfg, params, label); });
  return out;
}

}  // namespace

std::vector<ResultRow> run_sweep(const std::vector<Problem>& problems, const SweepSpec& spec, const RunConfig& cfg,
                                 const ScorerParams& params, std::vector<RunSummary>* runs) {
  spec.validate();
  std::vector<ResultRow> rows;
  for (Policy p : spec.policies)
    for (int n : spec.budgets)
      for (std::uint64_t seed : spec.seeds) {
        auto cell = run_cell(problems, p, n, seed, cfg, params, "");
        rows.push_back(aggregate(std::string(policy_name(p)), n, seed, problems, cell));
        if (runs) runs->insert(runs->end(), cell.begin(), cell.end());
      }
  return rows;
}

std::vector<ResultRow> run_ablation(const std::vector<Problem>& problems, const RunConfig& cfg,
                                    const ScorerParams& params, const std::vector<std::uint64_t>& seeds, int budget,
                                    std::vector<RunSummary>* runs) {
  const ScorerParams dtype_only = params.without_residual();
  struct Config {
    Policy policy;
    const ScorerParams* params;
  };
  const Config configs[] = {{Policy::verify_all, &params},
                            {Policy::gates_only, &params},
                            {Policy::gates_dtype_fixed_k, &dtype_only},
                            {Policy::full, &params}};
  std::vector<ResultRow> rows;
  for (const auto& c : configs)
    for (std::uint64_t seed : seeds) {
      auto cell = run_cell(problems, c.policy, budget, seed, cfg, *c.params, "");
      rows.push_back(aggregate(std::string(policy_name(c.policy)), budget, seed, problems, cell));
      if (runs) runs->insert(runs->end(), cell.begin(), cell.end());
    }
  return rows;
}

std::vector<CellSummary> summarize(const std::vector<ResultRow>& rows) {
  std::vector<CellSummary> out;
  std::vector<std::vector<double>> accs;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const CellSummary& c) { return c.policy == r.policy && c.budget == r.budget; });
    std::size_t k;
    if (it == out.end()) {
      out.push_back({r.policy, r.budget, 0, 0, 0, 0, 0});
      accs.emplace_back();
      k = out.size() - 1;
    } else {
      k = static_cast<std::size_t>(it - out.begin());
    }
    auto& c = out[k];
    ++c.seeds;
    c.mean_accuracy += r.accuracy;
    c.mean_verifier_calls += r.mean_verifier_calls;
    c.mean_generation_calls += r.mean_generation_calls;
    accs[k].push_back(r.accuracy);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& c = out[k];
    c.mean_accuracy /= c.seeds;
    c.mean_verifier_calls /= c.seeds;
    c.mean_generation_calls /= c.seeds;
    double ss = 0;
    for (double a : accs[k]) ss += (a - c.mean_accuracy) * (a - c.mean_accuracy);
    c.sd_accuracy = std::sqrt(ss / c.seeds);
  }
  return out;
}

std::vector<CandidateRecord> separable_corpus(std::uint64_t seed, int states, int candidates_per_state) {
  if (states < 1 || candidates_per_state < 2) throw std::invalid_argument("separable_corpus: need states >= 1, k >= 2");
  Rng rng(mix_seed(seed, 0x5e9));
  std::vector<CandidateRecord> out;
  int made = 0;
  for (std::uint64_t i = 0; made < states; ++i) {
    Problem prob = gen_problem(mix_seed(seed, i));
    State w = prob.initial;
    // a short random walk gives states at varied depths
    for (std::size_t walk = rng.below(4); walk > 0; --walk) {
      auto moves = applicable_moves(w);
      if (moves.empty()) break;
      w = canonicalize(apply(w, moves[rng.below(moves.size())]));
    }
    std::vector<Move> pos, neg;
    for (auto& m : applicable_moves(w)) (m.op == Op::isolate ? pos : neg).push_back(std::move(m));
    if (pos.empty() || neg.empty()) continue;
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::size_t n_pos = 1 + rng.below(std::min<std::size_t>(pos.size(), static_cast<std::size_t>(candidates_per_state) / 2));
    std::size_t n_neg = std::min(neg.size(), static_cast<std::size_t>(candidates_per_state) - n_pos);
    std::string state_text = serialize_state(w);
    std::string goal = w.goal.str();
    auto push = [&](const Move& m, int label) {
      out.push_back({prob.problem_id + "/" + std::to_string(made), state_text, serialize_move(m), goal,
                     serialize_state(canonicalize(apply(w, m))), label, "ok"});
    };
    for (std::size_t k = 0; k < n_pos; ++k) push(pos[k], 1);
    for (std::size_t k = 0; k < n_neg; ++k) push(neg[k], 0);
    ++made;
  }
  return out;
}

std::vector<Problem> generate_corpus(const CorpusConfig& corpus, const GeneratorModel& gen, int max_steps,
                                     int threads) {
  std::vector<Problem> out(static_cast<std::size_t>(corpus.count));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%llu-%04zu", static_cast<unsigned long long>(corpus.seed), i);
    Problem p = gen_problem(mix_seed(corpus.seed, i), corpus.size);
    p.problem_id = id;
    p.noise_scale = corpus.noise_scales[i % corpus.noise_scales.size()];
    out[i] = std::move(p);
  });
  if (out.size() >= 5 && corpus.binning_samples > 0) {
    auto bins = bin_difficulty(out, gen, max_steps, corpus.binning_samples, corpus.seed);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].difficulty_bin = bins.bins[i];
  }
  return out;
}

// ------------------------------------------------------------- exploration

ExploreResult explore(const std::vector<Problem>& problems, const RunConfig& cfg, const ScorerParams* params) {
  EngineConfig e = cfg.engine;
  e.policy = Policy::full;
  e.budget_B = cfg.explore_budget;
  AllocConfig a = cfg.alloc;
  a.k_min = a.k_base = a.k_max = 1 << 20;
  a.beta = 0.0;
  ScorerParams untrained =
      ScorerParams::untrained(cfg.train.distance_kind, cfg.train.dim, cfg.train.proj_dim, cfg.train.hidden, 0);
  untrained.hash_seed = cfg.train.hash_seed;
  const ScorerParams& scorer = params ? *params : untrained;

  struct PerProblem {
    std::vector<json> log;
    std::optional<TrajectoryRecord> traj;
    long decisions = 0;
  };
  std::vector<PerProblem> per(problems.size());
  parallel_for(problems.size(), cfg.threads, [&](std::size_t i) {
    LinsysDomain dom(problems[i], cfg.gen);
    auto& out = per[i];
    ExplorationSink sink = [&](const json& line) { out.log.push_back(line); };
    auto r = solve_gated(dom, scorer, e, a, cfg.verifier, problem_seed(cfg.gen.rng_seed, problems[i].problem_id),
                         &sink);
    out.decisions = static_cast<long>(r.ledger.per_state_queries.size());
    out.traj = trajectory_record(problems[i].problem_id, r.trajectory);
  });

  ExploreResult res;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    auto& pp = per[i];
    res.decision_points += pp.decisions;
    for (auto& line : pp.log) {
      std::string sid = line.at("problem_id").get<std::string>() + "/" + std::to_string(line.at("t").get<long>());
      for (const auto& c : line.at("candidates")) {
        if (!c.at("queried").get<bool>() || c.at("label").is_null()) continue;
        CandidateRecord rec;
        rec.state_id = sid;
        rec.state = line.at("state").get<std::string>();
        rec.move = c.at("move").get<std::string>();
        rec.goal = line.at("goal").get<std::string>();
        rec.post = c.value("post", std::string());
        rec.label = c.at("label").get<int>();
        rec.gate_reason = c.at("gate_reason").get<std::string>();
        res.dataset.push_back(std::move(rec));
      }
      res.log.push_back(std::move(line));
    }
    res.trajectories.push_back(std::move(*pp.traj));
  }
  return res;
}

void write_exploration(const std::filesystem::path& dir, const ExploreResult& r) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("dataset.jsonl");
    for (const auto& rec : r.dataset) out << to_json(rec).dump() << "\n";
  }
  {
    auto out = open("trajectories.jsonl");
    for (const auto& t : r.trajectories) out << to_json(t).dump() << "\n";
  }
  {
    auto out = open("exploration.jsonl");
    for (const auto& line : r.log) out << line.dump() << "\n";
  }
}

// ------------------------------------------------------------------ reports

namespace {

std::string num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

const char* kCsvHeader =
    "policy,budget,seed,problems,accuracy,mean_verifier_calls,mean_generation_calls,"
    "bin1_acc,bin2_acc,bin3_acc,bin4_acc,bin5_acc,bin1_n,bin2_n,bin3_n,bin4_n,bin5_n,ledger_ok";

}  // namespace

std::string render_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& header_comments) {
  std::string out;
  for (const auto& c : header_comments) out += "# " + c + "\n";
  out += kCsvHeader;
  out += "\n";
  for (const auto& r : rows) {
    out += r.policy + "," + std::to_string(r.budget) + "," + std::to_string(r.seed) + "," + std::to_string(r.problems) +
           "," + num(r.accuracy) + "," + num(r.mean_verifier_calls) + "," + num(r.mean_generation_calls);
    for (double b : r.bin_accuracy) out += "," + num(b);
    for (int n : r.bin_count) out += "," + std::to_string(n);
    out += r.ledger_ok ? ",1\n" : ",0\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
               const std::vector<std::string>& header_comments) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render_csv(rows, header_comments);
}

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<ResultRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header in " + path.string());
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 18) throw std::runtime_error("malformed CSV row: " + line);
    ResultRow r;
    r.policy = f[0];
    r.budget = std::stoi(f[1]);
    r.seed = std::stoull(f[2]);
    r.problems = std::stoi(f[3]);
    r.accuracy = std::stod(f[4]);
    r.mean_verifier_calls = std::stod(f[5]);
    r.mean_generation_calls = std::stod(f[6]);
    for (std::size_t b = 0; b < 5; ++b) {
      r.bin_accuracy[b] = std::stod(f[7 + b]);
      r.bin_count[b] = std::stoi(f[12 + b]);
    }
    r.ledger_ok = f[17] == "1";
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string aligned(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const auto& s = cells[r][c];
      if (c) out += "  ";
      // text columns left-aligned, numbers right-aligned
      bool left = c == 0;
      if (left)
        out += s + std::string(width[c] - s.size(), ' ');
      else
        out += std::string(width[c] - s.size(), ' ') + s;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out += std::string(total, '-') + "\n";
    }
  }
  return out;
}

}  // namespace

std::string render_table(const std::vector<ResultRow>& rows) {
  std::vector<std::vector<std::string>> cells{
      {"policy", "N", "seed", "acc", "ver_calls", "gen_calls", "b1", "b2", "b3", "b4", "b5", "ledger"}};
  for (const auto& r : rows) {
    std::vector<std::string> row{r.policy, std::to_string(r.budget), std::to_string(r.seed), num(r.accuracy, 3),
                                 num(r.mean_verifier_calls, 2), num(r.mean_generation_calls, 2)};
    for (double b : r.bin_accuracy) row.push_back(num(b, 3));
    row.push_back(r.ledger_ok ? "ok" : "FAIL");
    cells.push_back(std::move(row));
  }
  return aligned(cells);
}

std::string render_summary_table(const std::vector<CellSummary>& cs) {
  std::vector<std::vector<std::string>> cells{{"policy", "N", "seeds", "acc_mean", "acc_sd", "ver_calls", "gen_calls"}};
  for (const auto& c : cs)
    cells.push_back({c.policy, std::to_string(c.budget), std::to_string(c.seeds), num(c.mean_accuracy, 3),
                     num(c.sd_accuracy, 3), num(c.mean_verifier_calls, 2), num(c.mean_generation_calls, 2)});
  return aligned(cells);
}

}  // namespace veriflow

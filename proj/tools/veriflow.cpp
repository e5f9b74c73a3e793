// Command-line driver: corpus generation, exploration, training, single
// solves, benchmark sweeps and reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "veriflow/bench.hpp"
#include "veriflow/config.hpp"

namespace fs = std::filesystem;
using namespace veriflow;

namespace {

RunConfig config_or_default(const std::string& path) {
  if (!path.empty()) return load_config(path);
  RunConfig cfg;
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

std::pair<int, int> parse_vars(const std::string& s) {
  auto dash = s.find('-');
  if (dash == std::string::npos) {
    int n = std::stoi(s);
    return {n, n};
  }
  return {std::stoi(s.substr(0, dash)), std::stoi(s.substr(dash + 1))};
}

ScorerParams params_or_untrained(const std::string& path, const RunConfig& cfg) {
  if (!path.empty()) return ScorerParams::load(path);
  ScorerParams p = ScorerParams::untrained(cfg.train.distance_kind, cfg.train.dim, cfg.train.proj_dim, cfg.train.hidden, 0);
  p.hash_seed = cfg.train.hash_seed;
  return p;
}

void emit(const std::vector<ResultRow>& rows, const std::string& out, const std::vector<std::string>& header) {
  if (!out.empty()) write_csv(out, rows, header);
  std::cout << render_table(rows) << "\n" << render_summary_table(summarize(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-aware gated search with selective verification"};
  app.require_subcommand(1);

  // gen-problems
  auto* gen = app.add_subcommand("gen-problems", "Generate a seeded, difficulty-binned problem corpus");
  std::uint64_t gen_seed = 0;
  int gen_count = 200;
  std::string gen_vars = "2-3";
  std::string gen_out;
  std::string gen_config;
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--count", gen_count, "Number of problems");
  gen->add_option("--vars", gen_vars, "Variable count or range, e.g. 3 or 2-4");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "Config file");

  // explore
  auto* exp = app.add_subcommand("explore", "Collect verifier-labelled candidates with an untrained scorer");
  std::string exp_corpus, exp_config, exp_out, exp_params;
  exp->add_option("--corpus", exp_corpus, "Corpus directory or index")->required();
  exp->add_option("--config", exp_config, "Config file");
  exp->add_option("--out", exp_out, "Output directory")->required();
  exp->add_option("--params", exp_params, "Scorer params ordering commitments (default: untrained)");

  // train
  auto* trn = app.add_subcommand("train", "Train the pre-verification scorer");
  std::string trn_data, trn_traj, trn_config, trn_out;
  std::optional<std::uint64_t> trn_separable;
  auto* trn_data_opt = trn->add_option("--data", trn_data, "dataset.jsonl or an exploration directory");
  trn->add_option("--separable", trn_separable, "Train on the synthetic separable corpus with this seed")
      ->excludes(trn_data_opt);
  trn->add_option("--trajectories", trn_traj, "trajectories.jsonl (defaults to the data directory's)");
  trn->add_option("--config", trn_config, "Config file");
  trn->add_option("--out-params", trn_out, "Output params JSON")->required();

  // solve
  auto* slv = app.add_subcommand("solve", "Solve one problem and print the run summary");
  std::string slv_problem, slv_params, slv_policy = "full", slv_config, slv_log;
  int slv_budget = 64;
  std::uint64_t slv_seed = 0;
  slv->add_option("--problem", slv_problem, "Problem JSON file")->required();
  slv->add_option("--params", slv_params, "Scorer params (default: untrained)");
  slv->add_option("--policy", slv_policy, "full|gates_only|gates_dtype_fixed_k|verify_all|best_of_n|majority|beam");
  slv->add_option("--budget", slv_budget, "Budget N");
  slv->add_option("--seed", slv_seed, "Run seed");
  slv->add_option("--config", slv_config, "Config file");
  slv->add_option("--log", slv_log, "Write the exploration log (gated policies)");

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto* sweep = bench->add_subcommand("sweep", "Budget sweep across policies");
  std::string sw_spec, sw_corpus, sw_params, sw_out;
  sweep->add_option("--spec", sw_spec, "Config file with sweep.* keys")->required();
  sweep->add_option("--corpus", sw_corpus, "Corpus (default: generated from corpus.* keys)");
  sweep->add_option("--params", sw_params, "Scorer params for the gated policy");
  sweep->add_option("--out", sw_out, "CSV output");
  auto* abl = bench->add_subcommand("ablation", "Verify-all / gates-only / fixed-k / full ablation");
  std::string ab_corpus, ab_params, ab_config, ab_out;
  abl->add_option("--corpus", ab_corpus, "Corpus directory or index")->required();
  abl->add_option("--params", ab_params, "Trained scorer params")->required();
  abl->add_option("--config", ab_config, "Config file");
  abl->add_option("--out", ab_out, "CSV output");

  // report
  auto* rep = app.add_subcommand("report", "Render a result CSV");
  std::string rep_in, rep_format = "table";
  rep->add_option("--in", rep_in, "Result CSV")->required();
  rep->add_option("--format", rep_format, "csv|table")->check(CLI::IsMember({"csv", "table"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      RunConfig cfg = config_or_default(gen_config);
      cfg.corpus.count = gen_count;
      cfg.corpus.seed = gen_seed;
      if (const char* s = std::getenv("VERIFLOW_SEED"); s && *s) cfg.corpus.seed = std::stoull(s);
      std::tie(cfg.corpus.size.vars_min, cfg.corpus.size.vars_max) = parse_vars(gen_vars);
      cfg.validate();
      auto problems = generate_corpus(cfg.corpus, cfg.gen, cfg.engine.max_steps, cfg.threads);
      write_corpus(gen_out, problems);
      std::cout << "wrote " << problems.size() << " problems to " << gen_out << "\n";
    } else if (*exp) {
      RunConfig cfg = config_or_default(exp_config);
      auto problems = read_corpus(exp_corpus);
      std::optional<ScorerParams> params;
      if (!exp_params.empty()) params = ScorerParams::load(exp_params);
      auto r = explore(problems, cfg, params ? &*params : nullptr);
      write_exploration(exp_out, r);
      std::cout << "decision points " << r.decision_points << ", labelled candidates " << r.dataset.size()
                << ", trajectories " << r.trajectories.size() << "\n";
    } else if (*trn) {
      RunConfig cfg = config_or_default(trn_config);
      if (trn_data.empty() && !trn_separable) throw std::runtime_error("train needs --data or --separable");
      fs::path data = trn_data;
      fs::path traj = trn_traj;
      if (fs::is_directory(data)) {
        if (traj.empty()) traj = data / "trajectories.jsonl";
        data = data / "dataset.jsonl";
      } else if (traj.empty() && fs::exists(data.parent_path() / "trajectories.jsonl")) {
        traj = data.parent_path() / "trajectories.jsonl";
      }
      auto dataset = trn_separable ? separable_corpus(*trn_separable) : read_candidates(data);
      std::vector<TrajectoryRecord> trajectories;
      if (!trn_separable && !traj.empty()) trajectories = read_trajectories(traj);
      TrainReport report;
      ScorerParams p = train(dataset, trajectories, cfg.train, &report);
      p.save(trn_out);
      std::cout << "epochs " << cfg.train.epochs << ", loss " << report.epoch_loss.front() << " -> "
                << report.epoch_loss.back() << "\n"
                << "pairwise accuracy train " << report.train_pair_accuracy << " (" << report.train_pairs
                << " pairs), held-out " << report.heldout_pair_accuracy << " (" << report.heldout_pairs << " pairs)\n";
    } else if (*slv) {
      RunConfig cfg = config_or_default(slv_config);
      std::ifstream in(slv_problem, std::ios::binary);
      if (!in) throw std::runtime_error("cannot read " + slv_problem);
      Problem problem = problem_from_json(nlohmann::json::parse(in));
      ScorerParams params = params_or_untrained(slv_params, cfg);
      Policy policy = policy_from_name(slv_policy);
      if (!slv_log.empty()) {
        if (!is_gated_family(policy)) throw std::runtime_error("--log needs a gated policy");
        std::ofstream log(slv_log, std::ios::binary);
        ExplorationSink sink = [&](const nlohmann::json& line) { log << line.dump() << "\n"; };
        EngineConfig e = cfg.engine;
        e.policy = policy;
        e.budget_B = slv_budget;
        solve_gated(LinsysDomain(problem, cfg.gen), params, e, cfg.alloc, cfg.verifier,
                    problem_seed(slv_seed, problem.problem_id), &sink);
      }
      RunSummary s = run_policy(problem, policy, slv_budget, slv_seed, cfg, params);
      std::cout << s.to_json().dump() << "\n";
    } else if (*bench) {
      if (*sweep) {
        RunConfig cfg = load_config(sw_spec);
        auto problems = sw_corpus.empty() ? generate_corpus(cfg.corpus, cfg.gen, cfg.engine.max_steps, cfg.threads)
                                          : read_corpus(sw_corpus);
        ScorerParams params = params_or_untrained(sw_params, cfg);
        auto rows = run_sweep(problems, cfg.sweep, cfg, params);
        emit(rows, sw_out, {kBudgetNormalization});
      } else {
        RunConfig cfg = config_or_default(ab_config);
        auto problems = read_corpus(ab_corpus);
        ScorerParams params = ScorerParams::load(ab_params);
        auto rows = run_ablation(problems, cfg, params, cfg.sweep.seeds, cfg.ablation_budget);
        emit(rows, ab_out,
             {kBudgetNormalization, "ablation budget B = " + std::to_string(cfg.ablation_budget) + " verifier calls"});
      }
    } else if (*rep) {
      auto rows = read_csv(rep_in);
      if (rep_format == "csv")
        std::cout << render_csv(rows);
      else
        std::cout << render_table(rows) << "\n" << render_summary_table(summarize(rows));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

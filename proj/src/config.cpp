#include "veriflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace veriflow {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

long long to_int(std::string_view key, std::string_view v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  std::string s(v);
  char* end = nullptr;
  double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::stringstream ss{std::string(v)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T, class F>
std::vector<T> to_list(std::string_view key, std::string_view v, F conv) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(static_cast<T>(conv(key, item)));
  if (out.empty()) throw ConfigError(std::string(key) + ": expected a non-empty list");
  return out;
}

std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

void SweepSpec::validate() const {
  if (budgets.empty()) throw ConfigError("sweep.budgets must be non-empty");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] < 1) throw ConfigError("sweep.budgets must be positive");
    if (i && budgets[i] <= budgets[i - 1]) throw ConfigError("sweep.budgets must be strictly increasing");
  }
  if (seeds.empty()) throw ConfigError("sweep.seeds must be non-empty");
  if (policies.empty()) throw ConfigError("sweep.policies must be non-empty");
}

void RunConfig::validate() const {
  try {
    engine.validate();
    alloc.validate();
    gen.validate();
    verifier.validate();
    corpus.size.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  sweep.validate();
  if (train.lambda < 0) throw ConfigError("train.lambda must be >= 0");
  if (!(train.alpha > 0)) throw ConfigError("train.alpha must be > 0");
  if (!(train.learning_rate > 0)) throw ConfigError("train.lr must be > 0");
  if (train.epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (train.dim < 8) throw ConfigError("embed.dim must be >= 8");
  if (corpus.count < 1) throw ConfigError("corpus.count must be >= 1");
  if (corpus.noise_scales.empty()) throw ConfigError("corpus.noise_scales must be non-empty");
  if (ablation_budget < 1) throw ConfigError("bench.ablation_budget must be >= 1");
  if (explore_budget < 1) throw ConfigError("explore.budget must be >= 1");
}

void RunConfig::set(std::string_view key, std::string_view v) {
  using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
  static const std::map<std::string, Setter, std::less<>> setters = {
      {"engine.budget", [](RunConfig& c, auto k, auto v) { c.engine.budget_B = static_cast<int>(to_int(k, v)); }},
      {"engine.max_steps", [](RunConfig& c, auto k, auto v) { c.engine.max_steps = static_cast<int>(to_int(k, v)); }},
      {"engine.retry_limit", [](RunConfig& c, auto k, auto v) { c.engine.retry_limit = static_cast<int>(to_int(k, v)); }},
      {"engine.backtrack", [](RunConfig& c, auto k, auto v) { c.engine.backtrack = to_bool(k, v); }},
      {"engine.policy", [](RunConfig& c, auto, auto v) { c.engine.policy = policy_from_name(v); }},
      {"engine.n_samples", [](RunConfig& c, auto k, auto v) { c.engine.n_samples = static_cast<int>(to_int(k, v)); }},
      {"engine.beam_width", [](RunConfig& c, auto k, auto v) { c.engine.beam_width = static_cast<int>(to_int(k, v)); }},
      {"engine.max_decisions", [](RunConfig& c, auto k, auto v) { c.engine.max_decisions = static_cast<int>(to_int(k, v)); }},
      {"engine.retrieval", [](RunConfig& c, auto k, auto v) { c.engine.retrieval = to_bool(k, v); }},
      {"engine.retrieve_limit",
       [](RunConfig& c, auto k, auto v) { c.engine.retrieve_limit = static_cast<int>(to_int(k, v)); }},
      {"alloc.k_min", [](RunConfig& c, auto k, auto v) { c.alloc.k_min = static_cast<int>(to_int(k, v)); }},
      {"alloc.k_base", [](RunConfig& c, auto k, auto v) { c.alloc.k_base = static_cast<int>(to_int(k, v)); }},
      {"alloc.k_max", [](RunConfig& c, auto k, auto v) { c.alloc.k_max = static_cast<int>(to_int(k, v)); }},
      {"alloc.beta", [](RunConfig& c, auto k, auto v) { c.alloc.beta = to_double(k, v); }},
      {"alloc.sigma_bar",
       [](RunConfig& c, auto k, auto v) {
         if (v == "ema") {
           c.alloc.sigma_bar_mode = SigmaBarMode::ema;
         } else {
           c.alloc.sigma_bar_mode = SigmaBarMode::fixed;
           c.alloc.sigma_bar = to_double(k, v);
         }
       }},
      {"alloc.ema_decay", [](RunConfig& c, auto k, auto v) { c.alloc.ema_decay = to_double(k, v); }},
      {"gen.candidates", [](RunConfig& c, auto k, auto v) { c.gen.candidates_per_state = static_cast<int>(to_int(k, v)); }},
      {"gen.p_valid", [](RunConfig& c, auto k, auto v) { c.gen.p_valid = to_double(k, v); }},
      {"gen.p_wrong_claim", [](RunConfig& c, auto k, auto v) { c.gen.p_wrong_claim = to_double(k, v); }},
      {"gen.p_malformed", [](RunConfig& c, auto k, auto v) { c.gen.p_malformed = to_double(k, v); }},
      {"gen.p_contradict", [](RunConfig& c, auto k, auto v) { c.gen.p_contradict = to_double(k, v); }},
      {"gen.seed", [](RunConfig& c, auto k, auto v) { c.gen.rng_seed = to_u64(k, v); }},
      {"gen.depth_noise", [](RunConfig& c, auto k, auto v) { c.gen.depth_noise = to_list<double>(k, v, to_double); }},
      {"gen.focus", [](RunConfig& c, auto k, auto v) { c.gen.focus = to_double(k, v); }},
      {"verifier.fp_rate", [](RunConfig& c, auto k, auto v) { c.verifier.fp_rate = to_double(k, v); }},
      {"verifier.fn_rate", [](RunConfig& c, auto k, auto v) { c.verifier.fn_rate = to_double(k, v); }},
      {"verifier.solution_noise", [](RunConfig& c, auto k, auto v) { c.verifier.solution_score_noise = to_double(k, v); }},
      {"verifier.seed", [](RunConfig& c, auto k, auto v) { c.verifier.rng_seed = to_u64(k, v); }},
      {"embed.dim",
       [](RunConfig& c, auto k, auto v) { c.train.dim = static_cast<int>(to_int(k, v)); }},
      {"embed.seed", [](RunConfig& c, auto k, auto v) { c.train.hash_seed = to_u64(k, v); }},
      {"embed.distance", [](RunConfig& c, auto, auto v) { c.train.distance_kind = distance_kind_from_name(v); }},
      {"train.lambda", [](RunConfig& c, auto k, auto v) { c.train.lambda = to_double(k, v); }},
      {"train.alpha", [](RunConfig& c, auto k, auto v) { c.train.alpha = to_double(k, v); }},
      {"train.lr", [](RunConfig& c, auto k, auto v) { c.train.learning_rate = to_double(k, v); }},
      {"train.epochs", [](RunConfig& c, auto k, auto v) { c.train.epochs = static_cast<int>(to_int(k, v)); }},
      {"train.seed", [](RunConfig& c, auto k, auto v) { c.train.rng_seed = to_u64(k, v); }},
      {"train.batch_pairs", [](RunConfig& c, auto k, auto v) { c.train.batch_pairs = static_cast<int>(to_int(k, v)); }},
      {"train.proj_dim", [](RunConfig& c, auto k, auto v) { c.train.proj_dim = static_cast<int>(to_int(k, v)); }},
      {"train.hidden", [](RunConfig& c, auto k, auto v) { c.train.hidden = static_cast<int>(to_int(k, v)); }},
      {"train.holdout", [](RunConfig& c, auto k, auto v) { c.train.holdout_fraction = to_double(k, v); }},
      {"train.negatives", [](RunConfig& c, auto k, auto v) { c.train.negatives_per_state = static_cast<int>(to_int(k, v)); }},
      {"corpus.count", [](RunConfig& c, auto k, auto v) { c.corpus.count = static_cast<int>(to_int(k, v)); }},
      {"corpus.seed", [](RunConfig& c, auto k, auto v) { c.corpus.seed = to_u64(k, v); }},
      {"corpus.vars_min", [](RunConfig& c, auto k, auto v) { c.corpus.size.vars_min = static_cast<int>(to_int(k, v)); }},
      {"corpus.vars_max", [](RunConfig& c, auto k, auto v) { c.corpus.size.vars_max = static_cast<int>(to_int(k, v)); }},
      {"corpus.coef_max", [](RunConfig& c, auto k, auto v) { c.corpus.size.coef_max = static_cast<int>(to_int(k, v)); }},
      {"corpus.solution_max",
       [](RunConfig& c, auto k, auto v) { c.corpus.size.solution_max = static_cast<int>(to_int(k, v)); }},
      {"corpus.open_goal", [](RunConfig& c, auto k, auto v) { c.corpus.size.open_goal = to_bool(k, v); }},
      {"corpus.max_steps", [](RunConfig& c, auto k, auto v) { c.corpus.size.max_steps = static_cast<int>(to_int(k, v)); }},
      {"corpus.noise_scales",
       [](RunConfig& c, auto k, auto v) { c.corpus.noise_scales = to_list<double>(k, v, to_double); }},
      {"corpus.binning_samples",
       [](RunConfig& c, auto k, auto v) { c.corpus.binning_samples = static_cast<int>(to_int(k, v)); }},
      {"sweep.budgets", [](RunConfig& c, auto k, auto v) { c.sweep.budgets = to_list<int>(k, v, to_int); }},
      {"sweep.seeds", [](RunConfig& c, auto k, auto v) { c.sweep.seeds = to_list<std::uint64_t>(k, v, to_u64); }},
      {"sweep.policies",
       [](RunConfig& c, auto, auto v) {
         c.sweep.policies.clear();
         for (const auto& p : split_list(v)) c.sweep.policies.push_back(policy_from_name(p));
       }},
      {"bench.ablation_budget", [](RunConfig& c, auto k, auto v) { c.ablation_budget = static_cast<int>(to_int(k, v)); }},
      {"bench.threads", [](RunConfig& c, auto k, auto v) { c.threads = static_cast<int>(to_int(k, v)); }},
      {"explore.budget", [](RunConfig& c, auto k, auto v) { c.explore_budget = static_cast<int>(to_int(k, v)); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second(*this, key, v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

void RunConfig::override_seeds(std::uint64_t seed) {
  gen.rng_seed = seed;
  verifier.rng_seed = seed;
  train.rng_seed = seed;
  corpus.seed = seed;
  sweep.seeds = {seed};
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::stringstream ss{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* s = std::getenv("VERIFLOW_SEED"); s && *s) cfg.override_seeds(to_u64("VERIFLOW_SEED", s));
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = parse_config(buf.str());
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

std::string render_config(const RunConfig& c) {
  std::vector<std::string> pol;
  for (Policy p : c.sweep.policies) pol.emplace_back(policy_name(p));
  std::string pols;
  for (std::size_t i = 0; i < pol.size(); ++i) pols += (i ? "," : "") + pol[i];
  std::ostringstream os;
  os << "engine.budget = " << c.engine.budget_B << "\n"
     << "engine.max_steps = " << c.engine.max_steps << "\n"
     << "engine.retry_limit = " << c.engine.retry_limit << "\n"
     << "engine.backtrack = " << (c.engine.backtrack ? "true" : "false") << "\n"
     << "engine.policy = " << policy_name(c.engine.policy) << "\n"
     << "engine.n_samples = " << c.engine.n_samples << "\n"
     << "engine.beam_width = " << c.engine.beam_width << "\n"
     << "engine.max_decisions = " << c.engine.max_decisions << "\n"
     << "engine.retrieval = " << (c.engine.retrieval ? "true" : "false") << "\n"
     << "engine.retrieve_limit = " << c.engine.retrieve_limit << "\n"
     << "alloc.k_min = " << c.alloc.k_min << "\n"
     << "alloc.k_base = " << c.alloc.k_base << "\n"
     << "alloc.k_max = " << c.alloc.k_max << "\n"
     << "alloc.beta = " << fmt(c.alloc.beta) << "\n"
     << "alloc.sigma_bar = " << (c.alloc.sigma_bar_mode == SigmaBarMode::ema ? "ema" : fmt(c.alloc.sigma_bar)) << "\n"
     << "alloc.ema_decay = " << fmt(c.alloc.ema_decay) << "\n"
     << "gen.candidates = " << c.gen.candidates_per_state << "\n"
     << "gen.p_valid = " << fmt(c.gen.p_valid) << "\n"
     << "gen.p_wrong_claim = " << fmt(c.gen.p_wrong_claim) << "\n"
     << "gen.p_malformed = " << fmt(c.gen.p_malformed) << "\n"
     << "gen.p_contradict = " << fmt(c.gen.p_contradict) << "\n"
     << "gen.seed = " << c.gen.rng_seed << "\n"
     << "gen.depth_noise = " << join(c.gen.depth_noise) << "\n"
     << "gen.focus = " << fmt(c.gen.focus) << "\n"
     << "verifier.fp_rate = " << fmt(c.verifier.fp_rate) << "\n"
     << "verifier.fn_rate = " << fmt(c.verifier.fn_rate) << "\n"
     << "verifier.solution_noise = " << fmt(c.verifier.solution_score_noise) << "\n"
     << "verifier.seed = " << c.verifier.rng_seed << "\n"
     << "embed.dim = " << c.train.dim << "\n"
     << "embed.seed = " << c.train.hash_seed << "\n"
     << "embed.distance = " << distance_kind_name(c.train.distance_kind) << "\n"
     << "train.lambda = " << fmt(c.train.lambda) << "\n"
     << "train.alpha = " << fmt(c.train.alpha) << "\n"
     << "train.lr = " << fmt(c.train.learning_rate) << "\n"
     << "train.epochs = " << c.train.epochs << "\n"
     << "train.seed = " << c.train.rng_seed << "\n"
     << "train.batch_pairs = " << c.train.batch_pairs << "\n"
     << "train.proj_dim = " << c.train.proj_dim << "\n"
     << "train.hidden = " << c.train.hidden << "\n"
     << "train.holdout = " << fmt(c.train.holdout_fraction) << "\n"
     << "train.negatives = " << c.train.negatives_per_state << "\n"
     << "corpus.count = " << c.corpus.count << "\n"
     << "corpus.seed = " << c.corpus.seed << "\n"
     << "corpus.vars_min = " << c.corpus.size.vars_min << "\n"
     << "corpus.vars_max = " << c.corpus.size.vars_max << "\n"
     << "corpus.coef_max = " << c.corpus.size.coef_max << "\n"
     << "corpus.solution_max = " << c.corpus.size.solution_max << "\n"
     << "corpus.open_goal = " << (c.corpus.size.open_goal ? "true" : "false") << "\n"
     << "corpus.max_steps = " << c.corpus.size.max_steps << "\n"
     << "corpus.noise_scales = " << join(c.corpus.noise_scales) << "\n"
     << "corpus.binning_samples = " << c.corpus.binning_samples << "\n"
     << "sweep.budgets = " << join(c.sweep.budgets) << "\n"
     << "sweep.policies = " << pols << "\n"
     << "sweep.seeds = " << join(c.sweep.seeds) << "\n"
     << "bench.ablation_budget = " << c.ablation_budget << "\n"
     << "bench.threads = " << c.threads << "\n"
     << "explore.budget = " << c.explore_budget << "\n";
  return os.str();
}

}  // namespace veriflow

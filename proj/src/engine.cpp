#include "veriflow/engine.hpp"

#include <numeric>

namespace veriflow {

std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::full: return "full";
    case Policy::gates_only: return "gates_only";
    case Policy::gates_dtype_fixed_k: return "gates_dtype_fixed_k";
    case Policy::verify_all: return "verify_all";
    case Policy::best_of_n: return "best_of_n";
    case Policy::majority: return "majority";
    case Policy::beam: return "beam";
  }
  return "?";
}

Policy policy_from_name(std::string_view name) {
  for (Policy p : {Policy::full, Policy::gates_only, Policy::gates_dtype_fixed_k, Policy::verify_all,
                   Policy::best_of_n, Policy::majority, Policy::beam})
    if (policy_name(p) == name) return p;
  throw std::invalid_argument("unknown policy: " + std::string(name));
}

bool is_gated_family(Policy p) {
  return p == Policy::full || p == Policy::gates_only || p == Policy::gates_dtype_fixed_k || p == Policy::verify_all;
}

long CostLedger::query_sum() const {
  return std::accumulate(per_state_queries.begin(), per_state_queries.end(), 0L);
}

void EngineConfig::validate() const {
  if (budget_B < 0) throw std::invalid_argument("budget_B must be >= 0");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (retry_limit < 0) throw std::invalid_argument("retry_limit must be >= 0");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (retrieve_limit < 0) throw std::invalid_argument("retrieve_limit must be >= 0");
  if (beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
  if (policy == Policy::beam && n_samples < beam_width) throw std::invalid_argument("beam needs N >= b");
}

void VerifierModel::validate() const {
  auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate(fp_rate) || !rate(fn_rate)) throw std::invalid_argument("verifier flip rates must lie in [0,1]");
  if (!(solution_score_noise >= 0.0)) throw std::invalid_argument("solution_score_noise must be >= 0");
}

void MoveCache::insert(const std::string& key, const std::string& move_template) {
  auto& bucket = entries_[key];
  for (const auto& e : bucket)
    if (e.move_template == move_template) return;
  bucket.push_back({move_template, 0});
}

std::vector<std::string> MoveCache::lookup(const std::string& key, std::size_t limit) {
  std::vector<std::string> out;
  auto it = entries_.find(key);
  if (it == entries_.end()) return out;
  std::vector<Entry*> order;
  for (auto& e : it->second) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const Entry* a, const Entry* b) { return a->hits > b->hits; });
  if (order.size() > limit) order.resize(limit);
  for (Entry* e : order) {
    ++e->hits;
    out.push_back(e->move_template);
  }
  return out;
}

std::size_t MoveCache::size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : entries_) n += v.size();
  return n;
}

std::optional<Rational> weighted_vote(const std::vector<std::pair<std::optional<Rational>, double>>& samples) {
  std::vector<std::pair<Rational, double>> totals;  // first-seen order
  for (const auto& [ans, score] : samples) {
    if (!ans) continue;
    auto it = std::find_if(totals.begin(), totals.end(), [&](const auto& t) { return t.first == *ans; });
    if (it == totals.end())
      totals.emplace_back(*ans, score);
    else
      it->second += score;
  }
  std::optional<Rational> best;
  double best_score = 0.0;
  for (const auto& [ans, total] : totals)
    if (!best || total > best_score) {
      best = ans;
      best_score = total;
    }
  return best;
}

std::optional<Rational> plurality_vote(const std::vector<std::optional<Rational>>& answers) {
  std::vector<std::pair<Rational, int>> counts;
  for (const auto& a : answers) {
    if (!a) continue;
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& t) { return t.first == *a; });
    if (it == counts.end())
      counts.emplace_back(*a, 1);
    else
      ++it->second;
  }
  std::optional<Rational> best;
  int best_count = 0;
  for (const auto& [ans, c] : counts)
    if (c > best_count) {
      best = ans;
      best_count = c;
    }
  return best;
}

double solution_score(int correct_steps, int steps, double noise_sd, Rng& rng) {
  double frac = steps > 0 ? static_cast<double>(correct_steps) / steps : 0.0;
  double noise = noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0;
  return std::clamp(frac + noise, 0.0, 1.0);
}

}  // namespace veriflow

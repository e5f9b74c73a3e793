#include "veriflow/scorer.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "veriflow/rng.hpp"

namespace veriflow {

using nlohmann::json;

// ------------------------------------------------------------------ params

ScorerParams ScorerParams::untrained(DistanceKind kind, int dim, int proj_dim, int hidden, std::uint64_t seed) {
  ScorerParams p;
  p.dim = dim;
  p.proj_dim = proj_dim;
  p.hidden = hidden;
  p.distance_kind = kind;
  p.W1 = Eigen::MatrixXd::Zero(hidden, 3 * dim);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::VectorXd::Zero(hidden);
  p.b2 = 0.0;
  Rng rng(mix_seed(seed, 0x4d));
  p.M.resize(proj_dim, dim);
  double scale = 1.0 / std::sqrt(static_cast<double>(proj_dim));
  for (int r = 0; r < proj_dim; ++r)
    for (int c = 0; c < dim; ++c) p.M(r, c) = rng.normal() * scale;
  p.created_from = {{"kind", "untrained"}, {"seed", seed}};
  return p;
}

ScorerParams ScorerParams::random_init(DistanceKind kind, int dim, int proj_dim, int hidden, std::uint64_t seed) {
  ScorerParams p = untrained(kind, dim, proj_dim, hidden, seed);
  Rng rng(mix_seed(seed, 0x57));
  // input is three unit vectors, so Var(W1) = 1/3 gives unit pre-activations
  double s1 = 1.0 / std::sqrt(3.0);
  for (int r = 0; r < hidden; ++r)
    for (int c = 0; c < 3 * dim; ++c) p.W1(r, c) = rng.normal() * s1;
  // zero output layer: training starts from h = D_type
  p.created_from = {{"kind", "random_init"}, {"seed", seed}};
  return p;
}

ScorerParams ScorerParams::without_residual() const {
  ScorerParams p = *this;
  p.w2.setZero();
  p.b2 = 0.0;
  return p;
}

std::size_t ScorerParams::parameter_count() const {
  return static_cast<std::size_t>(M.size() + W1.size() + b1.size() + w2.size() + 1);
}

Eigen::VectorXd ScorerParams::flatten() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) v[k++] = M(r, c);
  for (Eigen::Index r = 0; r < W1.rows(); ++r)
    for (Eigen::Index c = 0; c < W1.cols(); ++c) v[k++] = W1(r, c);
  for (Eigen::Index i = 0; i < b1.size(); ++i) v[k++] = b1[i];
  for (Eigen::Index i = 0; i < w2.size(); ++i) v[k++] = w2[i];
  v[k] = b2;
  return v;
}

void ScorerParams::unflatten(const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != parameter_count()) throw std::invalid_argument("parameter vector size");
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = v[k++];
  for (Eigen::Index r = 0; r < W1.rows(); ++r)
    for (Eigen::Index c = 0; c < W1.cols(); ++c) W1(r, c) = v[k++];
  for (Eigen::Index i = 0; i < b1.size(); ++i) b1[i] = v[k++];
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2[i] = v[k++];
  b2 = v[k];
}

bool ScorerParams::all_finite() const {
  return M.allFinite() && W1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2);
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Eigen::MatrixXd matrix_from(const json& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw std::runtime_error(std::string("params: bad shape for ") + name);
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[k++].get<double>();
  return m;
}

}  // namespace

json ScorerParams::to_json() const {
  json j;
  j["format"] = "veriflow.scorer.v1";
  j["dim"] = dim;
  j["proj_dim"] = proj_dim;
  j["hidden"] = hidden;
  j["hash_seed"] = hash_seed;
  j["distance"] = std::string(distance_kind_name(distance_kind));
  j["alpha"] = alpha;
  j["M"] = matrix_json(M);
  j["W1"] = matrix_json(W1);
  j["b1"] = matrix_json(b1);
  j["w2"] = matrix_json(w2);
  j["b2"] = b2;
  j["created_from"] = created_from;
  return j;
}

ScorerParams ScorerParams::from_json(const json& j) {
  if (j.value("format", "") != "veriflow.scorer.v1") throw std::runtime_error("params: unknown format");
  ScorerParams p;
  p.dim = j.at("dim").get<int>();
  p.proj_dim = j.at("proj_dim").get<int>();
  p.hidden = j.at("hidden").get<int>();
  p.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  p.distance_kind = distance_kind_from_name(j.at("distance").get<std::string>());
  p.alpha = j.at("alpha").get<double>();
  p.M = matrix_from(j.at("M"), p.proj_dim, p.dim, "M");
  p.W1 = matrix_from(j.at("W1"), p.hidden, 3 * p.dim, "W1");
  p.b1 = matrix_from(j.at("b1"), p.hidden, 1, "b1");
  p.w2 = matrix_from(j.at("w2"), p.hidden, 1, "w2");
  p.b2 = j.at("b2").get<double>();
  p.created_from = j.value("created_from", json::object());
  return p;
}

void ScorerParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump() << "\n";
}

ScorerParams ScorerParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return from_json(json::parse(in));
}

// ----------------------------------------------------------------- scoring

ScoreInputs featurize(const Embedding& z_w, const Embedding& z_m, const Embedding& z_goal, const Embedding& z_post) {
  ScoreInputs in;
  const auto d = z_w.dim();
  in.x.resize(3 * d);
  in.x << z_w.values, z_m.values, z_goal.values;
  in.diff = z_post.values - z_goal.values;
  in.cosine = distance(z_post, z_goal, DistanceKind::cosine);
  return in;
}

ScoreInputs featurize(const ScorerParams& p, const std::string& state_text, const std::string& move_text,
                      const std::string& goal_text, const std::string& post_text) {
  return featurize(embed(state_text, p.dim, p.hash_seed, SourceKind::state),
                   embed(move_text, p.dim, p.hash_seed, SourceKind::move),
                   embed(goal_text, p.dim, p.hash_seed, SourceKind::goal),
                   embed(post_text, p.dim, p.hash_seed, SourceKind::state));
}

double residual(const ScorerParams& p, const ScoreInputs& in) {
  Eigen::VectorXd h = (p.W1 * in.x + p.b1).array().tanh().matrix();
  return p.w2.dot(h) + p.b2;
}

double d_type(const ScorerParams& p, const ScoreInputs& in) {
  if (p.distance_kind == DistanceKind::cosine) return in.cosine;
  return (p.M * in.diff).squaredNorm();
}

double hybrid_score(const ScorerParams& p, const ScoreInputs& in) { return d_type(p, in) + residual(p, in); }

double trainable_score(const ScorerParams& p, const ScoreInputs& in) {
  double s = residual(p, in);
  if (p.distance_kind == DistanceKind::learned) s += d_type(p, in);
  return s;
}

double d_type(const ScorerParams& p, const State& w_post, const GoalSpec& goal) {
  Embedding a = embed(serialize_state(w_post), p.dim, p.hash_seed, SourceKind::state);
  Embedding b = embed(goal.str(), p.dim, p.hash_seed, SourceKind::goal);
  return distance(a, b, p.distance_kind, &p.M);
}

double residual(const ScorerParams& p, const State& w, const Move& m, const GoalSpec& goal) {
  State post = apply(w, m);
  return residual(p, featurize(p, serialize_state(w), serialize_move(m), goal.str(), serialize_state(post)));
}

double hybrid_score(const ScorerParams& p, const State& w, const Move& m, const GoalSpec& goal) {
  State post = apply(w, m);
  return hybrid_score(p, featurize(p, serialize_state(w), serialize_move(m), goal.str(), serialize_state(post)));
}

// -------------------------------------------------------------------- data

json to_json(const CandidateRecord& r) {
  return json{{"state_id", r.state_id}, {"state", r.state},   {"move", r.move},
              {"goal", r.goal},         {"post", r.post},     {"label", r.label},
              {"gate_reason", r.gate_reason}};
}

CandidateRecord candidate_from_json(const json& j) {
  CandidateRecord r;
  r.state_id = j.at("state_id").get<std::string>();
  r.state = j.at("state").get<std::string>();
  r.move = j.at("move").get<std::string>();
  r.goal = j.at("goal").get<std::string>();
  r.post = j.value("post", r.state);
  r.label = j.at("label").get<int>();
  r.gate_reason = j.value("gate_reason", "ok");
  if (r.label != 0 && r.label != 1) throw std::runtime_error("candidate label must be 0 or 1");
  return r;
}

json to_json(const TrajectoryRecord& t) {
  json steps = json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"state", s.state}, {"move", s.move}, {"goal", s.goal}, {"post", s.post}});
  return json{{"problem_id", t.problem_id}, {"solved", t.solved}, {"steps", steps}};
}

TrajectoryRecord trajectory_from_json(const json& j) {
  TrajectoryRecord t;
  t.problem_id = j.at("problem_id").get<std::string>();
  t.solved = j.at("solved").get<bool>();
  for (const auto& s : j.at("steps"))
    t.steps.push_back({s.at("state").get<std::string>(), s.at("move").get<std::string>(),
                       s.at("goal").get<std::string>(), s.at("post").get<std::string>()});
  return t;
}

namespace {

template <class T, class F>
std::vector<T> read_jsonl(const std::filesystem::path& path, F&& parse) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<CandidateRecord> read_candidates(const std::filesystem::path& path) {
  return read_jsonl<CandidateRecord>(path, candidate_from_json);
}

std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path) {
  return read_jsonl<TrajectoryRecord>(path, trajectory_from_json);
}

// ------------------------------------------------------------------ losses

namespace {

struct GradParts {
  Eigen::MatrixXd M, W1;
  Eigen::VectorXd b1, w2;
  double b2 = 0.0;

  explicit GradParts(const ScorerParams& p)
      : M(Eigen::MatrixXd::Zero(p.M.rows(), p.M.cols())),
        W1(Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols())),
        b1(Eigen::VectorXd::Zero(p.b1.size())),
        w2(Eigen::VectorXd::Zero(p.w2.size())) {}

  Gradient flatten(const ScorerParams& shape) const {
    ScorerParams tmp = shape;
    tmp.M = M;
    tmp.W1 = W1;
    tmp.b1 = b1;
    tmp.w2 = w2;
    tmp.b2 = b2;
    return tmp.flatten();
  }
};

// Trainable scores of a set of distinct inputs, evaluated column-wise.
// Hashed n-gram inputs are mostly zeros, so X is stored sparse.
struct Evaluation {
  std::vector<const ScoreInputs*> items;
  std::unordered_map<const ScoreInputs*, Eigen::Index> column;
  Eigen::SparseMatrix<double> X, diff;
  Eigen::MatrixXd hidden, projected;
  Eigen::VectorXd s;

  Eigen::Index add(const ScoreInputs* in) {
    auto [it, fresh] = column.emplace(in, static_cast<Eigen::Index>(items.size()));
    if (fresh) items.push_back(in);
    return it->second;
  }

  void run(const ScorerParams& p) {
    const auto n = static_cast<Eigen::Index>(items.size());
    auto columns = [&](Eigen::SparseMatrix<double>& out, Eigen::Index rows, auto field) {
      out.resize(rows, n);
      out.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd& v = items[static_cast<std::size_t>(i)]->*field;
        out.startVec(i);
        for (Eigen::Index r = 0; r < v.size(); ++r)
          if (v[r] != 0.0) out.insertBack(r, i) = v[r];
      }
      out.finalize();
    };
    columns(X, 3 * p.dim, &ScoreInputs::x);
    hidden = ((p.W1 * X).colwise() + p.b1).array().tanh().matrix();
    s = ((hidden.transpose() * p.w2).array() + p.b2).matrix();
    if (p.distance_kind == DistanceKind::learned) {
      columns(diff, p.dim, &ScoreInputs::diff);
      projected = p.M * diff;
      s += projected.colwise().squaredNorm().transpose();
    }
  }

  void backprop(const ScorerParams& p, const Eigen::VectorXd& dLds, GradParts& g) const {
    g.b2 += dLds.sum();
    g.w2 += hidden * dLds;
    Eigen::MatrixXd da = (p.w2 * dLds.transpose()).array() * (1.0 - hidden.array().square());
    g.W1 += da * X.transpose();
    g.b1 += da.rowwise().sum();
    if (p.distance_kind == DistanceKind::learned)
      g.M += 2.0 * (projected * dLds.asDiagonal()) * diff.transpose();
  }
};

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double loss_impl(const ScorerParams& p, const std::vector<RankPair>& pairs, const std::vector<TrajTarget>& steps,
                 double lambda, GradParts* grad) {
  Evaluation ev;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pair_cols;
  pair_cols.reserve(pairs.size());
  for (const auto& pr : pairs) pair_cols.emplace_back(ev.add(pr.positive), ev.add(pr.negative));
  std::vector<Eigen::Index> step_cols;
  step_cols.reserve(steps.size());
  if (lambda != 0.0)
    for (const auto& st : steps) step_cols.push_back(ev.add(st.step));
  if (ev.items.empty()) return 0.0;
  ev.run(p);

  Eigen::VectorXd dLds = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ev.items.size()));
  double rank = 0.0;
  if (!pairs.empty()) {
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (const auto& [a, b] : pair_cols) {
      double margin = ev.s[a] - ev.s[b];
      rank += softplus(margin);
      double d = sigmoid(margin) * inv;
      dLds[a] += d;
      dLds[b] -= d;
    }
    rank *= inv;
  }
  double traj = 0.0;
  if (!step_cols.empty()) {
    const double inv = 1.0 / static_cast<double>(step_cols.size());
    for (std::size_t i = 0; i < step_cols.size(); ++i) {
      double e = ev.s[step_cols[i]] - steps[i].target;
      traj += e * e;
      dLds[step_cols[i]] += lambda * 2.0 * e * inv;
    }
    traj *= inv;
  }
  if (grad) ev.backprop(p, dLds, *grad);
  return rank + lambda * traj;
}

}  // namespace

double rank_loss(const ScorerParams& p, const std::vector<RankPair>& pairs, Gradient* grad) {
  if (pairs.empty()) throw std::invalid_argument("rank_loss needs at least one pair");
  GradParts g(p);
  double loss = loss_impl(p, pairs, {}, 0.0, grad ? &g : nullptr);
  if (grad) *grad = g.flatten(p);
  return loss;
}

double traj_loss(const ScorerParams& p, const std::vector<TrajTarget>& steps, Gradient* grad) {
  GradParts g(p);
  double loss = loss_impl(p, {}, steps, 1.0, grad ? &g : nullptr);
  if (grad) *grad = g.flatten(p);
  return loss;
}

double total_loss(const ScorerParams& p, const std::vector<RankPair>& pairs, const std::vector<TrajTarget>& steps,
                  double lambda, Gradient* grad) {
  GradParts g(p);
  double loss = loss_impl(p, pairs, steps, lambda, grad ? &g : nullptr);
  if (grad) *grad = g.flatten(p);
  return loss;
}

std::vector<TrajTarget> trajectory_targets(const std::vector<ScoreInputs>& steps, bool solved, double alpha) {
  if (!solved) throw std::invalid_argument("trajectory loss needs a solved trajectory");
  std::vector<TrajTarget> out;
  const auto L = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) out.push_back({&steps[i], alpha * (L - static_cast<double>(i))});
  return out;
}

double rank_loss(const ScorerParams& p, const std::vector<std::pair<CandidateRecord, CandidateRecord>>& pairs) {
  std::vector<ScoreInputs> inputs;
  inputs.reserve(2 * pairs.size());
  for (const auto& [pos, neg] : pairs) {
    if (pos.label != 1 || neg.label != 0 || pos.state_id != neg.state_id)
      throw std::invalid_argument("rank pairs must be (positive, negative) within one state");
    inputs.push_back(featurize(p, pos.state, pos.move, pos.goal, pos.post));
    inputs.push_back(featurize(p, neg.state, neg.move, neg.goal, neg.post));
  }
  std::vector<RankPair> rp;
  for (std::size_t i = 0; i < pairs.size(); ++i) rp.push_back({&inputs[2 * i], &inputs[2 * i + 1]});
  return rank_loss(p, rp);
}

double traj_loss(const ScorerParams& p, const TrajectoryRecord& t, double alpha) {
  std::vector<ScoreInputs> inputs;
  for (const auto& s : t.steps) inputs.push_back(featurize(p, s.state, s.move, s.goal, s.post));
  return traj_loss(p, trajectory_targets(inputs, t.solved, alpha));
}

// ---------------------------------------------------------------- training

namespace {

struct StateGroup {
  std::vector<std::size_t> pos, neg;
};

class Featurizer {
 public:
  explicit Featurizer(const ScorerParams& p) : p_(p) {}

  const Embedding& get(const std::string& text, SourceKind kind) {
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(text, embed(text, p_.dim, p_.hash_seed, kind)).first->second;
  }

  ScoreInputs operator()(const std::string& s, const std::string& m, const std::string& g, const std::string& post) {
    return featurize(get(s, SourceKind::state), get(m, SourceKind::move), get(g, SourceKind::goal),
                     get(post, SourceKind::state));
  }

 private:
  const ScorerParams& p_;
  std::unordered_map<std::string, Embedding> cache_;
};

void all_pairs(const std::vector<StateGroup>& groups, const std::vector<ScoreInputs>& inputs,
               std::vector<RankPair>& out) {
  for (const auto& g : groups)
    for (auto a : g.pos)
      for (auto b : g.neg) out.push_back({&inputs[a], &inputs[b]});
}

}  // namespace

double pairwise_accuracy(const ScorerParams& p, const std::vector<CandidateRecord>& records, std::size_t* pairs) {
  Featurizer feat(p);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_state;
  for (const auto& r : records) {
    double h = hybrid_score(p, feat(r.state, r.move, r.goal, r.post));
    auto& slot = by_state[r.state_id];
    (r.label ? slot.first : slot.second).push_back(h);
  }
  double correct = 0;
  std::size_t n = 0;
  for (const auto& [id, lists] : by_state)
    for (double hp : lists.first)
      for (double hn : lists.second) {
        ++n;
        correct += hp < hn ? 1.0 : (hp == hn ? 0.5 : 0.0);
      }
  if (pairs) *pairs = n;
  return n ? correct / static_cast<double>(n) : 0.0;
}

ScorerParams train(const std::vector<CandidateRecord>& dataset, const std::vector<TrajectoryRecord>& trajectories,
                   const TrainConfig& cfg, TrainReport* report) {
  if (cfg.lambda < 0 || cfg.alpha <= 0 || cfg.learning_rate <= 0)
    throw std::invalid_argument("train: need lambda >= 0, alpha > 0, learning_rate > 0");

  ScorerParams p = ScorerParams::random_init(cfg.distance_kind, cfg.dim, cfg.proj_dim, cfg.hidden, cfg.rng_seed);
  p.hash_seed = cfg.hash_seed;
  p.alpha = cfg.alpha;

  // Group by state; only mixed-label states yield pairs.
  std::map<std::string, StateGroup> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    (dataset[i].label ? groups[dataset[i].state_id].pos : groups[dataset[i].state_id].neg).push_back(i);
  std::vector<std::string> mixed;
  for (const auto& [id, g] : groups)
    if (!g.pos.empty() && !g.neg.empty()) mixed.push_back(id);
  if (mixed.empty()) throw DegenerateDataset("no state has both a verifier-accepted and a rejected candidate");

  Rng rng(mix_seed(cfg.rng_seed, 0x7a));
  rng.shuffle(mixed);
  auto n_held = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(mixed.size())));
  if (mixed.size() < 2) n_held = 0;
  std::vector<StateGroup> train_groups, held_groups;
  std::vector<CandidateRecord> held_records;
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    const auto& g = groups[mixed[i]];
    if (i < mixed.size() - n_held) {
      train_groups.push_back(g);
    } else {
      held_groups.push_back(g);
      for (auto k : g.pos) held_records.push_back(dataset[k]);
      for (auto k : g.neg) held_records.push_back(dataset[k]);
    }
  }

  Featurizer feat(p);
  std::vector<ScoreInputs> inputs(dataset.size());
  for (const auto& g : train_groups) {
    for (auto k : g.pos) inputs[k] = feat(dataset[k].state, dataset[k].move, dataset[k].goal, dataset[k].post);
    for (auto k : g.neg) inputs[k] = feat(dataset[k].state, dataset[k].move, dataset[k].goal, dataset[k].post);
  }
  std::vector<ScoreInputs> traj_inputs;
  std::vector<double> traj_target_values;
  for (const auto& t : trajectories) {
    if (!t.solved) continue;
    const auto L = static_cast<double>(t.steps.size());
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      traj_inputs.push_back(feat(s.state, s.move, s.goal, s.post));
      traj_target_values.push_back(cfg.alpha * (L - static_cast<double>(i)));
    }
  }
  std::vector<TrajTarget> traj_all;
  for (std::size_t i = 0; i < traj_inputs.size(); ++i) traj_all.push_back({&traj_inputs[i], traj_target_values[i]});

  std::vector<RankPair> full_pairs;
  all_pairs(train_groups, inputs, full_pairs);

  TrainReport rep;
  rep.train_states = train_groups.size();
  rep.heldout_states = held_groups.size();
  rep.epoch_loss.push_back(total_loss(p, full_pairs, traj_all, cfg.lambda));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<RankPair> pairs;
    for (const auto& g : train_groups) {
      std::vector<std::size_t> negs = g.neg;
      if (cfg.negatives_per_state > 0 && negs.size() > static_cast<std::size_t>(cfg.negatives_per_state)) {
        rng.shuffle(negs);
        negs.resize(static_cast<std::size_t>(cfg.negatives_per_state));
        std::sort(negs.begin(), negs.end());
      }
      for (auto a : g.pos)
        for (auto b : negs) pairs.push_back({&inputs[a], &inputs[b]});
    }
    rng.shuffle(pairs);
    std::vector<TrajTarget> traj = traj_all;
    rng.shuffle(traj);

    std::size_t n_batches = 1;
    if (cfg.batch_pairs > 0)
      n_batches = std::max<std::size_t>(1, (pairs.size() + static_cast<std::size_t>(cfg.batch_pairs) - 1) /
                                               static_cast<std::size_t>(cfg.batch_pairs));
    for (std::size_t b = 0; b < n_batches; ++b) {
      std::vector<RankPair> bp(pairs.begin() + static_cast<std::ptrdiff_t>(b * pairs.size() / n_batches),
                               pairs.begin() + static_cast<std::ptrdiff_t>((b + 1) * pairs.size() / n_batches));
      std::vector<TrajTarget> bt(traj.begin() + static_cast<std::ptrdiff_t>(b * traj.size() / n_batches),
                                 traj.begin() + static_cast<std::ptrdiff_t>((b + 1) * traj.size() / n_batches));
      GradParts g(p);
      loss_impl(p, bp, bt, cfg.lambda, &g);
      p.W1 -= cfg.learning_rate * g.W1;
      p.b1 -= cfg.learning_rate * g.b1;
      p.w2 -= cfg.learning_rate * g.w2;
      p.b2 -= cfg.learning_rate * g.b2;
      if (p.distance_kind == DistanceKind::learned) p.M -= cfg.learning_rate * g.M;
    }
    rep.epoch_loss.push_back(total_loss(p, full_pairs, traj_all, cfg.lambda));
    if (!std::isfinite(rep.epoch_loss.back()))
      throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch + 1) +
                               "; lower train.lr");
  }

  std::vector<CandidateRecord> train_records;
  for (const auto& g : train_groups) {
    for (auto k : g.pos) train_records.push_back(dataset[k]);
    for (auto k : g.neg) train_records.push_back(dataset[k]);
  }
  rep.train_pair_accuracy = pairwise_accuracy(p, train_records, &rep.train_pairs);
  rep.heldout_pair_accuracy = held_records.empty() ? 0.0 : pairwise_accuracy(p, held_records, &rep.heldout_pairs);

  p.created_from = {{"kind", "trained"},
                    {"records", dataset.size()},
                    {"trajectories", trajectories.size()},
                    {"train_states", rep.train_states},
                    {"heldout_states", rep.heldout_states},
                    {"lambda", cfg.lambda},
                    {"alpha", cfg.alpha},
                    {"learning_rate", cfg.learning_rate},
                    {"epochs", cfg.epochs},
                    {"batch_pairs", cfg.batch_pairs},
                    {"seed", cfg.rng_seed},
                    {"train_pair_accuracy", rep.train_pair_accuracy},
                    {"heldout_pair_accuracy", rep.heldout_pair_accuracy}};
  if (report) *report = std::move(rep);
  return p;
}

}  // namespace veriflow

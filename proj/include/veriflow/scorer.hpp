#pragma once

// Hybrid pre-verification score h(w,m) = D_type(w', w*) + r_theta(w,m) with
// w' = apply(w,m). Lower h ranks higher. The residual is a one-hidden-layer
// tanh network over [z_w; z_m; z_goal]; D_type is either cosine distance or
// a learned projection distance ||M(z_w' - z_goal)||^2.
//
// The residual only orders candidates for verification. Nothing in this
// module can accept or reject a move.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "veriflow/core.hpp"
#include "veriflow/embed.hpp"

namespace veriflow {

struct DegenerateDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScorerParams {
  int dim = kDefaultEmbedDim;
  int proj_dim = 32;
  int hidden = 64;
  std::uint64_t hash_seed = kDefaultHashSeed;
  DistanceKind distance_kind = DistanceKind::cosine;
  double alpha = 0.1;

  Eigen::MatrixXd M;   // proj_dim x dim
  Eigen::MatrixXd W1;  // hidden x 3*dim
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  nlohmann::json created_from = nlohmann::json::object();

  // All residual weights zero, so r == 0 everywhere. M is a seeded random
  // projection scaled so E||M u||^2 = ||u||^2.
  static ScorerParams untrained(DistanceKind kind = DistanceKind::cosine, int dim = kDefaultEmbedDim,
                                int proj_dim = 32, int hidden = 64, std::uint64_t seed = 0);
  // Network initialized for training (unit-variance hidden pre-activations).
  static ScorerParams random_init(DistanceKind kind, int dim, int proj_dim, int hidden, std::uint64_t seed);

  // Same distance, residual output forced to zero: h reduces to D_type.
  ScorerParams without_residual() const;

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& v);
  bool all_finite() const;

  nlohmann::json to_json() const;
  static ScorerParams from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ScorerParams load(const std::filesystem::path& path);
};

// Embedded view of one (state, move, goal, post-state) candidate.
struct ScoreInputs {
  Eigen::VectorXd x;     // [z_w; z_m; z_goal], length 3*dim
  Eigen::VectorXd diff;  // z_post - z_goal
  double cosine = 0.0;   // 1 - <z_post, z_goal>
};

ScoreInputs featurize(const ScorerParams& p, const std::string& state_text, const std::string& move_text,
                      const std::string& goal_text, const std::string& post_text);
// Same, from precomputed embeddings.
ScoreInputs featurize(const Embedding& z_w, const Embedding& z_m, const Embedding& z_goal, const Embedding& z_post);

double residual(const ScorerParams& p, const ScoreInputs& in);
double d_type(const ScorerParams& p, const ScoreInputs& in);
double hybrid_score(const ScorerParams& p, const ScoreInputs& in);
// The part of h that depends on trainable parameters: the residual, plus the
// projection distance when distance_kind is learned.
double trainable_score(const ScorerParams& p, const ScoreInputs& in);

// Convenience forms over core values.
double d_type(const ScorerParams& p, const State& w_post, const GoalSpec& goal);
double residual(const ScorerParams& p, const State& w, const Move& m, const GoalSpec& goal);
double hybrid_score(const ScorerParams& p, const State& w, const Move& m, const GoalSpec& goal);

// ------------------------------------------------------------------ data

struct CandidateRecord {
  std::string state_id;
  std::string state;  // canonical serialization of w
  std::string move;
  std::string goal;
  std::string post;  // serialization of apply(w, m)
  int label = 0;
  std::string gate_reason = "ok";
};

struct TrajectoryStep {
  std::string state;
  std::string move;
  std::string goal;
  std::string post;
};

struct TrajectoryRecord {
  std::string problem_id;
  bool solved = false;
  std::vector<TrajectoryStep> steps;
};

nlohmann::json to_json(const CandidateRecord& r);
CandidateRecord candidate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrajectoryRecord& t);
TrajectoryRecord trajectory_from_json(const nlohmann::json& j);

std::vector<CandidateRecord> read_candidates(const std::filesystem::path& path);
std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path);

// ---------------------------------------------------------------- losses

// Gradient with the same layout as ScorerParams::flatten().
using Gradient = Eigen::VectorXd;

struct RankPair {
  const ScoreInputs* positive;
  const ScoreInputs* negative;
};

struct TrajTarget {
  const ScoreInputs* step;
  double target;  // alpha * (L - i)
};

// mean log(1 + exp(s(m+) - s(m-))); throws std::invalid_argument when empty.
double rank_loss(const ScorerParams& p, const std::vector<RankPair>& pairs, Gradient* grad = nullptr);
// mean (s(w_i, m_i) - target_i)^2; zero for an empty list.
double traj_loss(const ScorerParams& p, const std::vector<TrajTarget>& steps, Gradient* grad = nullptr);
// rank_loss (zero when there are no pairs) + lambda * traj_loss.
double total_loss(const ScorerParams& p, const std::vector<RankPair>& pairs, const std::vector<TrajTarget>& steps,
                  double lambda, Gradient* grad = nullptr);

// Targets alpha*(L-i) for an accepted trajectory; throws for unsolved ones.
std::vector<TrajTarget> trajectory_targets(const std::vector<ScoreInputs>& steps, bool solved, double alpha);

// Record-level forms.
double rank_loss(const ScorerParams& p, const std::vector<std::pair<CandidateRecord, CandidateRecord>>& pairs);
double traj_loss(const ScorerParams& p, const TrajectoryRecord& t, double alpha);

// --------------------------------------------------------------- training

struct TrainConfig {
  double lambda = 0.1;
  double alpha = 0.1;
  double learning_rate = 0.05;
  int epochs = 40;
  int batch_pairs = 64;  // 0: one full batch per epoch
  std::uint64_t rng_seed = 0;
  DistanceKind distance_kind = DistanceKind::learned;
  int dim = kDefaultEmbedDim;
  int proj_dim = 32;
  int hidden = 64;
  std::uint64_t hash_seed = kDefaultHashSeed;
  double holdout_fraction = 0.2;
  int negatives_per_state = 8;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // full training objective; [0] is before any update
  double train_pair_accuracy = 0.0;
  double heldout_pair_accuracy = 0.0;
  std::size_t train_states = 0;
  std::size_t heldout_states = 0;
  std::size_t train_pairs = 0;
  std::size_t heldout_pairs = 0;
};

ScorerParams train(const std::vector<CandidateRecord>& dataset, const std::vector<TrajectoryRecord>& trajectories,
                   const TrainConfig& cfg, TrainReport* report = nullptr);

// Fraction of (positive, negative) pairs within each state where the
// positive gets strictly lower h; ties count one half. States lacking either
// label are skipped. Returns the pair count through `pairs` when given.
double pairwise_accuracy(const ScorerParams& p, const std::vector<CandidateRecord>& records,
                         std::size_t* pairs = nullptr);

}  // namespace veriflow

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "veriflow/bench.hpp"
#include "veriflow/scorer.hpp"

using namespace veriflow;

namespace {

constexpr int kDim = 12;

struct Draw {
  ScorerParams params;
  std::vector<ScoreInputs> inputs;
  std::vector<RankPair> pairs;
  std::vector<TrajTarget> steps;
};

Draw make_draw(std::uint64_t seed, DistanceKind kind) {
  Rng rng(seed);
  Draw d{oracle::random_params(rng, kind, kDim, 4, 5), {}, {}, {}};
  d.inputs.reserve(9);
  for (int i = 0; i < 9; ++i) d.inputs.push_back(oracle::random_inputs(rng, kDim));
  for (int i = 0; i < 3; ++i) d.pairs.push_back({&d.inputs[static_cast<std::size_t>(i)], &d.inputs[static_cast<std::size_t>(i + 3)]});
  for (int i = 6; i < 9; ++i) d.steps.push_back({&d.inputs[static_cast<std::size_t>(i)], 0.1 * (9 - i)});
  return d;
}

}  // namespace

TEST_CASE("closed-form rank loss") {
  ScorerParams p = ScorerParams::untrained(DistanceKind::cosine, kDim, 4, 5);
  Rng rng(1);
  ScoreInputs a = oracle::random_inputs(rng, kDim), b = oracle::random_inputs(rng, kDim);
  CHECK(std::abs(rank_loss(p, {{&a, &b}}) - std::log(2.0)) <= 1e-12);

  // residual = b2 + w2 . tanh(b1): move only the positive's score via W1 on a
  // coordinate the negative lacks.
  ScoreInputs pos = a, neg = a;
  pos.x.setZero();
  neg.x.setZero();
  pos.x[0] = 1.0;
  p.W1(0, 0) = std::atanh(0.5);
  p.w2[0] = -20.0;  // r(m+) - r(m-) = -20 * 0.5 = -10
  CHECK(residual(p, pos) - residual(p, neg) == doctest::Approx(-10.0).epsilon(1e-12));
  CHECK(rank_loss(p, {{&pos, &neg}}) == doctest::Approx(4.5399e-5).epsilon(1e-4));
  CHECK(rank_loss(p, {{&pos, &neg}}) == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-12));

  std::vector<RankPair> once{{&pos, &neg}, {&a, &b}};
  std::vector<RankPair> twice{{&pos, &neg}, {&a, &b}, {&pos, &neg}, {&a, &b}};
  CHECK(rank_loss(p, once) == doctest::Approx(rank_loss(p, twice)).epsilon(1e-15));
  CHECK_THROWS_AS(rank_loss(p, std::vector<RankPair>{}), std::invalid_argument);
}

TEST_CASE("closed-form trajectory loss") {
  ScorerParams p = ScorerParams::untrained(DistanceKind::cosine, kDim, 4, 5);
  Rng rng(2);
  std::vector<ScoreInputs> steps;
  for (int i = 0; i < 3; ++i) steps.push_back(oracle::random_inputs(rng, kDim));
  auto targets = trajectory_targets(steps, true, 0.1);
  CHECK(std::abs(traj_loss(p, targets) - 0.14 / 3.0) <= 1e-12);
  CHECK(traj_loss(p, trajectory_targets(steps, true, 0.0)) == 0.0);
  CHECK(traj_loss(p, std::vector<TrajTarget>{}) == 0.0);
  CHECK_THROWS_AS(trajectory_targets(steps, false, 0.1), std::invalid_argument);
}

TEST_CASE("total loss combines the parts") {
  Draw d = make_draw(3, DistanceKind::learned);
  CHECK(total_loss(d.params, d.pairs, d.steps, 0.0) == doctest::Approx(rank_loss(d.params, d.pairs)).epsilon(1e-15));
  double r = rank_loss(d.params, d.pairs), t = traj_loss(d.params, d.steps);
  CHECK(total_loss(d.params, d.pairs, d.steps, 2.5) == doctest::Approx(r + 2.5 * t).epsilon(1e-13));
  // lambda = 1 with both parts at 0.5
  ScorerParams z = ScorerParams::untrained(DistanceKind::cosine, kDim, 4, 5);
  ScoreInputs a = d.inputs[0];
  z.b2 = 0.0;
  std::vector<TrajTarget> one{{&a, std::sqrt(0.5)}};
  std::vector<RankPair> tie{{&a, &a}};
  double expect = std::log(2.0) + 0.5;
  CHECK(total_loss(z, tie, one, 1.0) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto kind : {DistanceKind::cosine, DistanceKind::learned}) {
      Draw d = make_draw(100 + seed, kind);
      Gradient g;
      rank_loss(d.params, d.pairs, &g);
      auto fr = [&](const ScorerParams& q) { return rank_loss(q, d.pairs); };
      CHECK(oracle::max_relative_error(g, oracle::central_difference(fr, d.params)) <= 1e-4);

      traj_loss(d.params, d.steps, &g);
      auto ft = [&](const ScorerParams& q) { return traj_loss(q, d.steps); };
      CHECK(oracle::max_relative_error(g, oracle::central_difference(ft, d.params)) <= 1e-4);

      total_loss(d.params, d.pairs, d.steps, 0.7, &g);
      auto fa = [&](const ScorerParams& q) { return total_loss(q, d.pairs, d.steps, 0.7); };
      CHECK(oracle::max_relative_error(g, oracle::central_difference(fa, d.params)) <= 1e-4);
    }
  }
}

TEST_CASE("zero residual reduces h to D_type") {
  ScorerParams p = ScorerParams::untrained(DistanceKind::cosine, kDim, 4, 5);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    ScoreInputs in = oracle::random_inputs(rng, kDim);
    CHECK(residual(p, in) == 0.0);
    CHECK(hybrid_score(p, in) == d_type(p, in));
  }
  p.b2 = 0.25;
  ScoreInputs in = oracle::random_inputs(rng, kDim);
  CHECK(residual(p, in) == 0.25);

  Draw d = make_draw(5, DistanceKind::learned);
  ScorerParams nr = d.params.without_residual();
  for (const auto& x : d.inputs) CHECK(hybrid_score(nr, x) == d_type(d.params, x));
}

TEST_CASE("uniform shift of the output bias keeps every top-k set") {
  Draw d = make_draw(6, DistanceKind::cosine);
  auto ranking = [&](const ScorerParams& p) {
    std::vector<std::size_t> idx(d.inputs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return hybrid_score(p, d.inputs[a]) < hybrid_score(p, d.inputs[b]); });
    return idx;
  };
  ScorerParams shifted = d.params;
  shifted.b2 += 3.0;
  CHECK(ranking(d.params) == ranking(shifted));
  for (const auto& x : d.inputs)
    CHECK(hybrid_score(shifted, x) - hybrid_score(d.params, x) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("d_type on core states") {
  ScorerParams p = ScorerParams::untrained(DistanceKind::cosine);
  State w = make_state({parse_equation("x+y=3"), parse_equation("x-y=1")}, GoalSpec{"x", std::nullopt}, {"x", "y"}, 0);
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    State v = w;
    v.trace[0].constant = Rational(static_cast<std::int64_t>(rng.below(50)));
    v.context.bindings["y"] = Rational(static_cast<std::int64_t>(rng.below(7)));
    double c = d_type(p, v, v.goal);
    CHECK(std::isfinite(c));
    CHECK(c >= 0.0);
  }
  ScorerParams l = ScorerParams::untrained(DistanceKind::learned);
  CHECK(d_type(l, w, w.goal) >= 0.0);
}

TEST_CASE("params json round-trip is exact") {
  Draw d = make_draw(7, DistanceKind::learned);
  auto path = std::filesystem::temp_directory_path() / "veriflow_params_test.json";
  d.params.save(path);
  ScorerParams back = ScorerParams::load(path);
  CHECK(back.flatten() == d.params.flatten());
  CHECK(back.distance_kind == DistanceKind::learned);
  std::filesystem::remove(path);
}

TEST_CASE("training on the separable corpus") {
  auto corpus = separable_corpus(0, 120);
  TrainConfig cfg;
  cfg.epochs = 15;
  TrainReport rep;
  ScorerParams a = train(corpus, {}, cfg, &rep);
  CHECK(rep.heldout_pair_accuracy >= 0.95);
  CHECK(rep.heldout_pairs > 0);
  ScorerParams b = train(corpus, {}, cfg);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.all_finite());
}

TEST_CASE("full-batch training loss is non-increasing") {
  auto corpus = separable_corpus(1, 40);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_pairs = 0;
  cfg.learning_rate = 0.02;
  TrainReport rep;
  train(corpus, {}, cfg, &rep);
  REQUIRE(rep.epoch_loss.size() == 13);
  for (std::size_t i = 1; i < rep.epoch_loss.size(); ++i) CHECK(rep.epoch_loss[i] <= rep.epoch_loss[i - 1] + 1e-6);
}

TEST_CASE("degenerate dataset is rejected") {
  std::vector<CandidateRecord> all_pos(3);
  for (auto& r : all_pos) {
    r.state_id = "s";
    r.label = 1;
  }
  CHECK_THROWS_AS(train(all_pos, {}, TrainConfig{}), DegenerateDataset);
}

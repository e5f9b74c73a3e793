#pragma once

// Explicit labeled DAG used as an exhaustively checkable search domain.
// Nodes are 0..n-1, every edge goes from a lower to a higher index, and each
// edge carries a verifier label.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "veriflow/gates.hpp"
#include "veriflow/rational.hpp"
#include "veriflow/rng.hpp"

namespace veriflow {

struct DagEdge {
  int from = 0;
  int to = 0;
  bool valid = true;
};

struct DagState {
  int node = 0;
  int depth = 0;
  int remaining_budget = 0;
};

struct DagMove {
  int edge = 0;  // index into DagDomain::edges
  friend bool operator==(const DagMove&, const DagMove&) = default;
};

struct DagParams {
  int nodes_min = 6;
  int nodes_max = 24;
  double edge_prob = 0.25;
  double valid_prob = 0.6;
  int goals = 2;
};

class DagDomain {
 public:
  using State = DagState;
  using Move = DagMove;

  DagDomain(int nodes, std::vector<DagEdge> edges, int start, std::set<int> goals, std::string id = "dag");
  static DagDomain random(std::uint64_t seed, const DagParams& params = {});

  std::string id() const { return id_; }
  State initial() const { return State{start_, 0, 0}; }
  // Every out-edge of the current node; the proposer is exhaustive here.
  std::vector<Move> propose(const State& s, Rng& rng, int count) const;
  int candidates_per_state() const { return nodes_; }
  GateReport gate(const State& s, const Move& m) const;
  bool check(const State&, const Move& m) const { return edges_.at(static_cast<std::size_t>(m.edge)).valid; }
  State apply(const State& s, const Move& m) const;
  bool is_goal(const State& s) const { return goals_.contains(s.node); }
  std::optional<Rational> answer(const State& s) const { return Rational(s.node); }
  int depth(const State& s) const { return s.depth; }
  std::string state_text(const State& s) const { return "node " + std::to_string(s.node); }
  std::string move_text(const Move& m) const;
  std::string goal_text() const;
  std::string precondition_key(const State& s) const { return state_text(s); }
  std::string move_template(const Move& m) const { return move_text(m); }
  std::optional<Move> instantiate(const std::string& tmpl, const State& s) const;

  int nodes() const { return nodes_; }
  int start() const { return start_; }
  const std::vector<DagEdge>& edges() const { return edges_; }
  const std::set<int>& goals() const { return goals_; }

 private:
  int nodes_;
  std::vector<DagEdge> edges_;
  std::vector<std::vector<int>> out_;
  int start_;
  std::set<int> goals_;
  std::string id_;
};

// Fewest valid edges from the start to any goal node, by breadth-first
// search; nullopt when no goal is reachable over valid edges.
std::optional<int> bfs_min_steps(const DagDomain& dag);

}  // namespace veriflow

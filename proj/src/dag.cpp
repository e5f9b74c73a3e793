#include "veriflow/dag.hpp"

#include <deque>
#include <stdexcept>

namespace veriflow {

DagDomain::DagDomain(int nodes, std::vector<DagEdge> edges, int start, std::set<int> goals, std::string id)
    : nodes_(nodes), edges_(std::move(edges)), out_(static_cast<std::size_t>(nodes)), start_(start),
      goals_(std::move(goals)), id_(std::move(id)) {
  if (nodes_ < 1) throw std::invalid_argument("dag needs at least one node");
  if (start_ < 0 || start_ >= nodes_) throw std::invalid_argument("dag start out of range");
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    if (e.from < 0 || e.to >= nodes_ || e.from >= e.to) throw std::invalid_argument("dag edges must go low to high");
    out_[static_cast<std::size_t>(e.from)].push_back(static_cast<int>(i));
  }
  for (int g : goals_)
    if (g < 0 || g >= nodes_) throw std::invalid_argument("dag goal out of range");
}

DagDomain DagDomain::random(std::uint64_t seed, const DagParams& params) {
  Rng rng(mix_seed(seed, 0xda6));
  int n = params.nodes_min + static_cast<int>(rng.below(static_cast<std::size_t>(params.nodes_max - params.nodes_min + 1)));
  std::vector<DagEdge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(params.edge_prob)) edges.push_back({i, j, rng.bernoulli(params.valid_prob)});
  std::set<int> goals;
  for (int g = 0; g < params.goals && n > 1; ++g) goals.insert(1 + static_cast<int>(rng.below(static_cast<std::size_t>(n - 1))));
  return DagDomain(n, std::move(edges), 0, std::move(goals), "dag" + std::to_string(seed));
}

std::vector<DagMove> DagDomain::propose(const State& s, Rng&, int) const {
  std::vector<Move> out;
  for (int e : out_.at(static_cast<std::size_t>(s.node))) out.push_back({e});
  return out;
}

GateReport DagDomain::gate(const State& s, const Move& m) const {
  if (m.edge < 0 || static_cast<std::size_t>(m.edge) >= edges_.size())
    return GateReport::fail(GateKind::structural, GateCode::index_out_of_range, "no such edge");
  if (edges_[static_cast<std::size_t>(m.edge)].from != s.node)
    return GateReport::fail(GateKind::structural, GateCode::bad_argument, "edge does not leave this node");
  return GateReport::pass(GateKind::context);
}

DagState DagDomain::apply(const State& s, const Move& m) const {
  if (gate(s, m).code != GateCode::ok) throw std::invalid_argument("edge not applicable");
  return State{edges_[static_cast<std::size_t>(m.edge)].to, s.depth + 1, s.remaining_budget};
}

std::string DagDomain::move_text(const Move& m) const {
  const auto& e = edges_.at(static_cast<std::size_t>(m.edge));
  return "edge(" + std::to_string(e.from) + "," + std::to_string(e.to) + ")";
}

std::string DagDomain::goal_text() const {
  std::string out = "goal:";
  for (int g : goals_) out += " " + std::to_string(g);
  return out;
}

std::optional<DagMove> DagDomain::instantiate(const std::string& tmpl, const State& s) const {
  for (int e : out_.at(static_cast<std::size_t>(s.node)))
    if (move_text({e}) == tmpl) return Move{e};
  return std::nullopt;
}

std::optional<int> bfs_min_steps(const DagDomain& dag) {
  std::vector<int> dist(static_cast<std::size_t>(dag.nodes()), -1);
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(dag.nodes()));
  for (const auto& e : dag.edges())
    if (e.valid) adj[static_cast<std::size_t>(e.from)].push_back(e.to);
  std::deque<int> queue{dag.start()};
  dist[static_cast<std::size_t>(dag.start())] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (dag.goals().contains(u)) return dist[static_cast<std::size_t>(u)];
    for (int v : adj[static_cast<std::size_t>(u)])
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
  }
  return std::nullopt;
}

}  // namespace veriflow

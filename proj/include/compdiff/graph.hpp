#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace compdiff::graph {

// Undirected within-team communication graph with mandatory self-loops.
// Agents are indexed 0..size-1 locally; globally, team-1 agents come first.
struct TeamGraph {
  int team_id = 1;  // 1 or 2
  int size = 0;
  std::vector<std::uint8_t> adjacency;  // size*size, symmetric, diagonal set

  bool adjacent(int i, int j) const {
    return adjacency[static_cast<std::size_t>(i) * size + j] != 0;
  }
  // Neighbor count excluding the self-loop.
  int degree(int k) const;
  // Ascending local indices, including k itself.
  std::vector<int> neighborhood(int k) const;
  // Throws std::invalid_argument on structural violations (shape, symmetry,
  // missing self-loops, disconnected graph, bad team id).
  void validate() const;
};

bool is_connected(const TeamGraph& g);

enum class GraphKind { kRing, kFull, kRandomConnected };

// Ring: each agent linked to its two cyclic neighbors. Full: all pairs.
// RandomConnected: a random spanning tree plus independent edges with
// probability p; resampled until connected (the tree already guarantees it).
// Deterministic given seed. Throws std::invalid_argument for size < 1 or,
// for the random kind, p outside (0, 1].
TeamGraph build_team_graph(GraphKind kind, int size, double p = 0.0,
                           std::uint64_t seed = 0, int team_id = 1);

// Doubly stochastic combination weights over a connected TeamGraph.
struct CombinationMatrix {
  int size = 0;
  std::vector<double> entries;  // row-major; weight(l, k) = entries[l*size + k]
  double lambda2 = 0.0;         // spectral radius of A - (1/K) 1 1^T

  double weight(int l, int k) const {
    return entries[static_cast<std::size_t>(l) * size + k];
  }
};

// Metropolis-Hastings rule: weight(l, k) = 1 / (1 + max(deg l, deg k)) for
// neighbors l != k (degrees exclude self-loops), diagonal takes the slack.
// Throws std::invalid_argument on a disconnected graph.
CombinationMatrix metropolis_weights(const TeamGraph& g);

// Directed cross-team link, global agent ids, endpoints on different teams.
struct CrossLink {
  int src = 0;
  int dst = 0;
};

// Left-stochastic estimate-fusion matrix for one receiving team t.
// Rows are indexed by every agent in the network, columns by the receiving
// team's agents; column k puts uniform weight on k itself, k's within-team
// neighbors, and any cross links terminating at k.
struct CrossMatrix {
  int receiving_team = 1;
  int total_agents = 0;  // rows
  int team_size = 0;     // columns
  std::vector<double> entries;    // total_agents x team_size, row-major
  std::vector<double> sub_block;  // team_size x team_size: rows of the receiving team
  double rho_sub = 0.0;           // spectral radius of sub_block

  double weight(int global_src, int local_dst) const {
    return entries[static_cast<std::size_t>(global_src) * team_size + local_dst];
  }
};

// Throws AssumptionViolation if no cross link points into the receiving team,
// std::invalid_argument on malformed links.
CrossMatrix build_cross_matrix(const TeamGraph& team1, const TeamGraph& team2,
                               const std::vector<CrossLink>& links, int receiving_team);

struct NetworkTopology {
  TeamGraph team1, team2;
  CombinationMatrix a1, a2;
  CrossMatrix to_team1, to_team2;
  std::vector<CrossLink> cross_links;

  int total_agents() const { return team1.size + team2.size; }
  int team_of(int agent) const { return agent < team1.size ? 1 : 2; }
  int local_index(int agent) const { return agent < team1.size ? agent : agent - team1.size; }
  int global_index(int team, int local) const { return team == 1 ? local : team1.size + local; }
};

// Validates both graphs and the links, then derives all four matrices.
NetworkTopology make_topology(TeamGraph t1, TeamGraph t2, std::vector<CrossLink> links);

// Draws `per_direction` distinct links each way, uniform endpoints.
std::vector<CrossLink> sample_cross_links(int k1, int k2, int per_direction,
                                          std::uint64_t seed);

// Largest absolute eigenvalue. Dense solve for n <= 64, power iteration with
// deflation beyond; relative accuracy 1e-9 on the supported matrix families.
// Throws std::invalid_argument when rows != cols or data size mismatches.
double spectral_radius(int rows, int cols, std::span<const double> data);

namespace detail {
double spectral_radius_dense(int n, std::span<const double> data);
double spectral_radius_power(int n, std::span<const double> data);
}  // namespace detail

// File format:
// {"teams": [{"id": 1, "size": N, "edges": [[i, j], ...]}, {"id": 2, ...}],
//  "cross_links": [[src, dst], ...]}
// Edges use local indices, self-loops are implicit, cross links use global ids.
NetworkTopology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const NetworkTopology& topo);

struct TopologyReport {
  double lambda2_team1 = 0.0, lambda2_team2 = 0.0;
  double rho_into_team1 = 0.0, rho_into_team2 = 0.0;
  bool pass = false;
  std::vector<std::string> failures;
};

// Non-throwing check of the connectivity/contraction requirements.
TopologyReport verify_topology_properties(const TeamGraph& t1, const TeamGraph& t2,
                                          const std::vector<CrossLink>& links);

}  // namespace compdiff::graph

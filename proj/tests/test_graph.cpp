#include "doctest.h"

#include "compdiff/errors.hpp"
#include "compdiff/graph.hpp"
#include "compdiff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace compdiff;
using namespace compdiff::graph;
using compdiff::rng::Purpose;
using compdiff::rng::Stream;
using compdiff::rng::stream_seed;

namespace {

// Row sums, column sums, symmetry, nonnegativity of a combination matrix.
void check_doubly_stochastic(const CombinationMatrix& a) {
  const int n = a.size;
  for (int i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < n; ++j) {
      REQUIRE(a.weight(i, j) >= 0.0);
      CHECK(a.weight(i, j) == a.weight(j, i));
      row += a.weight(i, j);
      col += a.weight(j, i);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
  }
}

void check_left_stochastic(const CrossMatrix& c) {
  for (int k = 0; k < c.team_size; ++k) {
    double col = 0.0;
    for (int src = 0; src < c.total_agents; ++src) {
      REQUIRE(c.weight(src, k) >= 0.0);
      col += c.weight(src, k);
    }
    CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("metropolis weights on a 4-ring are uniform 1/3 with lambda2 = 1/3") {
  const TeamGraph g = build_team_graph(GraphKind::kRing, 4);
  const CombinationMatrix a = metropolis_weights(g);
  // Every agent has degree 2, so each neighbor weight is 1/(1+2) and the
  // diagonal slack is also 1/3.
  for (int l = 0; l < 4; ++l)
    for (int k = 0; k < 4; ++k) {
      if (g.adjacent(l, k))
        CHECK(a.weight(l, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
      else
        CHECK(a.weight(l, k) == 0.0);
    }
  // Eigenvalues of this circulant are {1, 1/3, 1/3, -1/3}.
  CHECK(a.lambda2 == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  check_doubly_stochastic(a);
}

TEST_CASE("metropolis weights on an 8-ring have the circulant second eigenvalue") {
  const CombinationMatrix a = metropolis_weights(build_team_graph(GraphKind::kRing, 8));
  // 1/3 + (2/3) cos(2 pi / 8)
  const double expected = 1.0 / 3.0 + (2.0 / 3.0) * std::cos(std::acos(-1.0) / 4.0);
  CHECK(a.lambda2 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(a.lambda2 == doctest::Approx(0.804738).epsilon(1e-6));
}

TEST_CASE("full graphs average exactly and have lambda2 = 0") {
  const CombinationMatrix a2 = metropolis_weights(build_team_graph(GraphKind::kFull, 2));
  for (int l = 0; l < 2; ++l)
    for (int k = 0; k < 2; ++k) CHECK(a2.weight(l, k) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a2.lambda2 == doctest::Approx(0.0).epsilon(1e-9));

  const CombinationMatrix a5 = metropolis_weights(build_team_graph(GraphKind::kFull, 5));
  for (int l = 0; l < 5; ++l)
    for (int k = 0; k < 5; ++k) CHECK(a5.weight(l, k) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(a5.lambda2 < 1e-8);
}

TEST_CASE("a single isolated agent is its own consensus") {
  const CombinationMatrix a = metropolis_weights(build_team_graph(GraphKind::kRing, 1));
  CHECK(a.size == 1);
  CHECK(a.weight(0, 0) == 1.0);
  CHECK(a.lambda2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ring construction links exactly the cyclic neighbors") {
  const TeamGraph g = build_team_graph(GraphKind::kRing, 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(g.degree(i) == 2);
    CHECK(g.adjacent(i, (i + 1) % 6));
    CHECK(g.adjacent(i, (i + 5) % 6));
    CHECK(g.adjacent(i, i));
    const auto nb = g.neighborhood(i);
    CHECK(nb.size() == 3);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    CHECK(std::find(nb.begin(), nb.end(), i) != nb.end());
  }
  g.validate();
}

TEST_CASE("random connected graphs are deterministic per seed and actually connected") {
  const TeamGraph a = build_team_graph(GraphKind::kRandomConnected, 12, 0.2, 99);
  const TeamGraph b = build_team_graph(GraphKind::kRandomConnected, 12, 0.2, 99);
  CHECK(a.adjacency == b.adjacency);
  CHECK(is_connected(a));
  const TeamGraph c = build_team_graph(GraphKind::kRandomConnected, 12, 0.2, 100);
  CHECK(a.adjacency != c.adjacency);  // different seed, different draw
  CHECK_THROWS_AS(build_team_graph(GraphKind::kRandomConnected, 4, 0.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_team_graph(GraphKind::kRandomConnected, 4, 1.5, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_team_graph(GraphKind::kRing, 0), std::invalid_argument);
}

TEST_CASE("validate rejects a disconnected graph") {
  TeamGraph g;
  g.team_id = 1;
  g.size = 4;
  g.adjacency.assign(16, 0);
  auto set = [&](int i, int j) {
    g.adjacency[static_cast<std::size_t>(i) * 4 + j] = 1;
    g.adjacency[static_cast<std::size_t>(j) * 4 + i] = 1;
  };
  for (int i = 0; i < 4; ++i) set(i, i);
  set(0, 1);
  set(2, 3);               // two components
  CHECK(!is_connected(g));
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  CHECK_THROWS_AS(metropolis_weights(g), std::invalid_argument);
  set(1, 2);
  g.validate();  // now connected
}

TEST_CASE("doubly stochastic property holds across random graph sizes") {
  for (int size = 2; size <= 16; ++size) {
    const TeamGraph g =
        build_team_graph(GraphKind::kRandomConnected, size, 0.3, 1000 + static_cast<std::uint64_t>(size));
    const CombinationMatrix a = metropolis_weights(g);
    check_doubly_stochastic(a);
    CHECK(a.lambda2 < 1.0);
    CHECK(a.lambda2 >= 0.0);
  }
}

TEST_CASE("spectral radius matches a hand eigenvalue and handles the power path") {
  // [[0, 2], [0.5, 0]] has eigenvalues +-1.
  const std::vector<double> m{0.0, 2.0, 0.5, 0.0};
  CHECK(spectral_radius(2, 2, m) == doctest::Approx(1.0).epsilon(1e-9));

  // Diagonal 100x100 (past the dense cutoff): radius is the largest |entry|,
  // including a negative dominant eigenvalue.
  const int n = 100;
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i) * n + i] = 0.3 + 0.006 * i;
  d[0] = -0.995;
  CHECK(spectral_radius(n, n, d) == doctest::Approx(0.995).epsilon(1e-7));
  CHECK(detail::spectral_radius_power(n, d) == doctest::Approx(0.995).epsilon(1e-7));

  // Dense and power routes agree on a symmetric stochastic-like matrix.
  const TeamGraph g = build_team_graph(GraphKind::kRandomConnected, 24, 0.25, 7);
  const CombinationMatrix a = metropolis_weights(g);
  const double dense = detail::spectral_radius_dense(24, a.entries);
  const double power = detail::spectral_radius_power(24, a.entries);
  CHECK(dense == doctest::Approx(power).epsilon(1e-7));

  CHECK_THROWS_AS(spectral_radius(2, 3, std::vector<double>(6, 0.0)), std::invalid_argument);
}

TEST_CASE("single-receiver cross column splits between self and source") {
  // Two one-agent teams, one link each way. Column for the receiver is
  // {self: 1/2, opposing source: 1/2}; the receiving-team sub-block is [1/2].
  const TeamGraph t1 = build_team_graph(GraphKind::kRing, 1, 0.0, 0, 1);
  const TeamGraph t2 = build_team_graph(GraphKind::kRing, 1, 0.0, 0, 2);
  const std::vector<CrossLink> links{{1, 0}, {0, 1}};
  const CrossMatrix c1 = build_cross_matrix(t1, t2, links, 1);
  CHECK(c1.total_agents == 2);
  CHECK(c1.team_size == 1);
  CHECK(c1.weight(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c1.weight(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c1.rho_sub == doctest::Approx(0.5).epsilon(1e-9));
  check_left_stochastic(c1);
}

TEST_CASE("cross column weights are uniform over self, neighbors and inbound links") {
  const TeamGraph t1 = build_team_graph(GraphKind::kRing, 4, 0.0, 0, 1);
  const TeamGraph t2 = build_team_graph(GraphKind::kRing, 4, 0.0, 0, 2);
  // One link into team-1 agent 0 (global source 4 = team-2 local 0).
  const std::vector<CrossLink> links{{4, 0}, {0, 4}};
  const CrossMatrix c = build_cross_matrix(t1, t2, links, 1);
  // Column 0: {0, 1, 3} within team plus source 4 -> four entries of 1/4.
  CHECK(c.weight(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c.weight(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c.weight(3, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c.weight(4, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c.weight(2, 0) == 0.0);
  // Column 1 has no inbound link: uniform over {0, 1, 2}.
  CHECK(c.weight(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(c.weight(4, 1) == 0.0);
  check_left_stochastic(c);
  CHECK(c.rho_sub < 1.0);
}

TEST_CASE("a team with no inbound link violates the connectivity assumption") {
  const TeamGraph t1 = build_team_graph(GraphKind::kRing, 3, 0.0, 0, 1);
  const TeamGraph t2 = build_team_graph(GraphKind::kRing, 3, 0.0, 0, 2);
  const std::vector<CrossLink> only_into_team1{{3, 0}};
  CHECK_NOTHROW(build_cross_matrix(t1, t2, only_into_team1, 1));
  CHECK_THROWS_AS(build_cross_matrix(t1, t2, only_into_team1, 2), AssumptionViolation);
  CHECK_THROWS_AS(make_topology(t1, t2, only_into_team1), AssumptionViolation);
  CHECK_THROWS_AS(make_topology(t1, t2, {}), AssumptionViolation);
}

TEST_CASE("malformed cross links are rejected") {
  const TeamGraph t1 = build_team_graph(GraphKind::kRing, 3, 0.0, 0, 1);
  const TeamGraph t2 = build_team_graph(GraphKind::kRing, 3, 0.0, 0, 2);
  using V = std::vector<CrossLink>;
  CHECK_THROWS_AS(make_topology(t1, t2, V{{0, 1}, {3, 0}, {0, 3}}), std::invalid_argument);  // same team
  CHECK_THROWS_AS(make_topology(t1, t2, V{{6, 0}, {0, 3}}), std::invalid_argument);          // out of range
  CHECK_THROWS_AS(make_topology(t1, t2, V{{3, 0}, {3, 0}, {0, 3}}), std::invalid_argument);  // duplicate
}

TEST_CASE("sampled cross links are distinct, directed both ways, deterministic") {
  const auto links = sample_cross_links(6, 5, 3, 12345);
  CHECK(links.size() == 6);
  int into1 = 0, into2 = 0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& l = links[i];
    const bool dst_team1 = l.dst < 6;
    (dst_team1 ? into1 : into2)++;
    CHECK(((l.src < 6) != dst_team1));  // endpoints span the teams
    for (std::size_t j = i + 1; j < links.size(); ++j)
      CHECK((links[j].src != l.src || links[j].dst != l.dst));
  }
  CHECK(into1 == 3);
  CHECK(into2 == 3);
  const auto again = sample_cross_links(6, 5, 3, 12345);
  for (std::size_t i = 0; i < links.size(); ++i) {
    CHECK(again[i].src == links[i].src);
    CHECK(again[i].dst == links[i].dst);
  }
}

TEST_CASE("contraction and stochasticity hold over many random topologies") {
  Stream pick(stream_seed(77, 0, 0, 0, Purpose::kTopology));
  for (int trial = 0; trial < 100; ++trial) {
    const int k1 = 2 + static_cast<int>(pick.next_below(15));
    const int k2 = 2 + static_cast<int>(pick.next_below(15));
    const int per = 1 + static_cast<int>(pick.next_below(3));
    const TeamGraph t1 = build_team_graph(GraphKind::kRandomConnected, k1, 0.25,
                                          2000 + static_cast<std::uint64_t>(trial), 1);
    const TeamGraph t2 = build_team_graph(GraphKind::kRandomConnected, k2, 0.25,
                                          3000 + static_cast<std::uint64_t>(trial), 2);
    const auto links = sample_cross_links(k1, k2, per, 4000 + static_cast<std::uint64_t>(trial));
    const NetworkTopology topo = make_topology(t1, t2, links);
    CHECK(topo.a1.lambda2 < 1.0);
    CHECK(topo.a2.lambda2 < 1.0);
    CHECK(topo.to_team1.rho_sub < 1.0);
    CHECK(topo.to_team2.rho_sub < 1.0);
    check_doubly_stochastic(topo.a1);
    check_doubly_stochastic(topo.a2);
    check_left_stochastic(topo.to_team1);
    check_left_stochastic(topo.to_team2);
    const TopologyReport rep = verify_topology_properties(t1, t2, links);
    CHECK(rep.pass);
    CHECK(rep.failures.empty());
  }
}

TEST_CASE("verify_topology_properties reports failures instead of throwing") {
  const TeamGraph t1 = build_team_graph(GraphKind::kRing, 3, 0.0, 0, 1);
  const TeamGraph t2 = build_team_graph(GraphKind::kRing, 3, 0.0, 0, 2);
  const TopologyReport rep = verify_topology_properties(t1, t2, {{3, 0}});
  CHECK(!rep.pass);
  CHECK(!rep.failures.empty());
}

TEST_CASE("topology json round-trips losslessly") {
  const TeamGraph t1 = build_team_graph(GraphKind::kRandomConnected, 5, 0.4, 11, 1);
  const TeamGraph t2 = build_team_graph(GraphKind::kRandomConnected, 7, 0.3, 12, 2);
  const auto links = sample_cross_links(5, 7, 2, 13);
  const NetworkTopology topo = make_topology(t1, t2, links);
  const NetworkTopology back = topology_from_json(topology_to_json(topo));
  CHECK(back.team1.adjacency == topo.team1.adjacency);
  CHECK(back.team2.adjacency == topo.team2.adjacency);
  CHECK(back.cross_links.size() == topo.cross_links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    CHECK(back.cross_links[i].src == topo.cross_links[i].src);
    CHECK(back.cross_links[i].dst == topo.cross_links[i].dst);
  }
  CHECK(back.a1.lambda2 == doctest::Approx(topo.a1.lambda2).epsilon(1e-12));
  CHECK(back.to_team2.rho_sub == doctest::Approx(topo.to_team2.rho_sub).epsilon(1e-12));
  CHECK(back.a1.entries == topo.a1.entries);  // same construction path, bitwise
}

TEST_CASE("topology json parser rejects malformed documents") {
  CHECK_THROWS(topology_from_json(nlohmann::json::parse(R"({"teams": []})")));
  CHECK_THROWS(topology_from_json(nlohmann::json::parse(
      R"({"teams": [{"id": 1, "size": 2, "edges": [[0, 1]]},
                    {"id": 2, "size": 2, "edges": [[0, 1]]}]})")));  // no cross_links key
  CHECK_THROWS(topology_from_json(nlohmann::json::parse(
      R"({"teams": [{"id": 1, "size": 2, "edges": [[0, 1]], "extra": 1},
                    {"id": 2, "size": 2, "edges": [[0, 1]]}],
          "cross_links": [[2, 0], [0, 2]]})")));  // unknown key
}

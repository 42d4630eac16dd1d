#include "compdiff/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <set>
#include <stdexcept>

#include "compdiff/errors.hpp"
#include "compdiff/rng.hpp"

namespace compdiff::graph {

namespace {

std::size_t idx(int i, int j, int n) { return static_cast<std::size_t>(i) * n + j; }

}  // namespace

int TeamGraph::degree(int k) const {
  int d = 0;
  for (int j = 0; j < size; ++j)
    if (j != k && adjacent(k, j)) ++d;
  return d;
}

std::vector<int> TeamGraph::neighborhood(int k) const {
  std::vector<int> out;
  for (int j = 0; j < size; ++j)
    if (adjacent(k, j)) out.push_back(j);
  return out;
}

void TeamGraph::validate() const {
  if (team_id != 1 && team_id != 2) throw std::invalid_argument("team_id must be 1 or 2");
  if (size < 1) throw std::invalid_argument("team size must be >= 1");
  if (adjacency.size() != static_cast<std::size_t>(size) * size)
    throw std::invalid_argument("adjacency size does not match team size");
  for (int i = 0; i < size; ++i) {
    if (!adjacent(i, i)) throw std::invalid_argument("every agent needs a self-loop");
    for (int j = 0; j < i; ++j)
      if (adjacent(i, j) != adjacent(j, i))
        throw std::invalid_argument("within-team adjacency must be symmetric");
  }
  if (!is_connected(*this)) throw std::invalid_argument("team graph must be connected");
}

bool is_connected(const TeamGraph& g) {
  if (g.size <= 1) return g.size == 1;
  std::vector<char> seen(g.size, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v = 0; v < g.size; ++v) {
      if (v != u && g.adjacent(u, v) && !seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  return count == g.size;
}

TeamGraph build_team_graph(GraphKind kind, int size, double p, std::uint64_t seed,
                           int team_id) {
  if (size < 1) throw std::invalid_argument("team size must be >= 1");
  TeamGraph g;
  g.team_id = team_id;
  g.size = size;
  g.adjacency.assign(static_cast<std::size_t>(size) * size, 0);
  auto link = [&](int i, int j) {
    g.adjacency[idx(i, j, size)] = 1;
    g.adjacency[idx(j, i, size)] = 1;
  };
  for (int i = 0; i < size; ++i) g.adjacency[idx(i, i, size)] = 1;

  switch (kind) {
    case GraphKind::kRing:
      for (int i = 0; i < size; ++i) link(i, (i + 1) % size);
      break;
    case GraphKind::kFull:
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < i; ++j) link(i, j);
      break;
    case GraphKind::kRandomConnected: {
      if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("edge probability must lie in (0, 1]");
      rng::Stream stream(rng::stream_seed(seed, 0, 0, 0, rng::Purpose::kTopology));
      for (;;) {
        std::fill(g.adjacency.begin(), g.adjacency.end(), 0);
        for (int i = 0; i < size; ++i) g.adjacency[idx(i, i, size)] = 1;
        // random attachment order, then each node hooks onto an earlier one
        std::vector<int> perm(size);
        for (int i = 0; i < size; ++i) perm[i] = i;
        for (int i = size - 1; i > 0; --i)
          std::swap(perm[i], perm[stream.next_below(static_cast<std::uint64_t>(i) + 1)]);
        for (int j = 1; j < size; ++j)
          link(perm[j], perm[stream.next_below(static_cast<std::uint64_t>(j))]);
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < i; ++j)
            if (stream.next_double() < p) link(i, j);
        if (is_connected(g)) break;
      }
      break;
    }
  }
  g.validate();
  return g;
}

CombinationMatrix metropolis_weights(const TeamGraph& g) {
  g.validate();
  const int n = g.size;
  CombinationMatrix a;
  a.size = n;
  a.entries.assign(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<int> deg(n);
  for (int k = 0; k < n; ++k) deg[k] = g.degree(k);
  for (int k = 0; k < n; ++k) {
    double off = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == k || !g.adjacent(l, k)) continue;
      const double w = 1.0 / (1.0 + std::max(deg[l], deg[k]));
      a.entries[idx(l, k, n)] = w;
      off += w;
    }
    a.entries[idx(k, k, n)] = 1.0 - off;
  }
  // lambda2 = spectral radius of A - (1/n) 1 1^T
  std::vector<double> centered(a.entries);
  const double uniform = 1.0 / n;
  for (double& v : centered) v -= uniform;
  a.lambda2 = spectral_radius(n, n, centered);
  return a;
}

CrossMatrix build_cross_matrix(const TeamGraph& team1, const TeamGraph& team2,
                               const std::vector<CrossLink>& links, int receiving_team) {
  if (receiving_team != 1 && receiving_team != 2)
    throw std::invalid_argument("receiving team must be 1 or 2");
  const TeamGraph& recv = receiving_team == 1 ? team1 : team2;
  const int k1 = team1.size;
  const int total = team1.size + team2.size;
  const int cols = recv.size;
  const int base = receiving_team == 1 ? 0 : k1;

  CrossMatrix m;
  m.receiving_team = receiving_team;
  m.total_agents = total;
  m.team_size = cols;
  m.entries.assign(static_cast<std::size_t>(total) * cols, 0.0);

  bool any_incoming = false;
  for (int k = 0; k < cols; ++k) {
    std::vector<int> sources;  // global ids: self + within-team neighbors first
    for (int l : recv.neighborhood(k)) sources.push_back(base + l);
    for (const CrossLink& link : links) {
      if (link.dst == base + k) {
        sources.push_back(link.src);
        any_incoming = true;
      }
    }
    const double w = 1.0 / static_cast<double>(sources.size());
    for (int src : sources) m.entries[idx(src, k, cols)] = w;
  }
  if (!any_incoming)
    throw AssumptionViolation(
        "Assumption 1 (connectivity): no cross-team link into team " +
        std::to_string(receiving_team));

  m.sub_block.assign(static_cast<std::size_t>(cols) * cols, 0.0);
  for (int l = 0; l < cols; ++l)
    for (int k = 0; k < cols; ++k)
      m.sub_block[idx(l, k, cols)] = m.entries[idx(base + l, k, cols)];
  m.rho_sub = spectral_radius(cols, cols, m.sub_block);
  return m;
}

namespace {

void validate_links(const TeamGraph& t1, const TeamGraph& t2,
                    const std::vector<CrossLink>& links) {
  const int k1 = t1.size;
  const int total = t1.size + t2.size;
  std::set<std::pair<int, int>> seen;
  for (const CrossLink& link : links) {
    if (link.src < 0 || link.src >= total || link.dst < 0 || link.dst >= total)
      throw std::invalid_argument("cross link endpoint out of range");
    const bool src_team1 = link.src < k1;
    const bool dst_team1 = link.dst < k1;
    if (src_team1 == dst_team1)
      throw std::invalid_argument("cross links must span the two teams");
    if (!seen.insert({link.src, link.dst}).second)
      throw std::invalid_argument("duplicate cross link");
  }
}

}  // namespace

NetworkTopology make_topology(TeamGraph t1, TeamGraph t2, std::vector<CrossLink> links) {
  t1.team_id = 1;
  t2.team_id = 2;
  t1.validate();
  t2.validate();
  validate_links(t1, t2, links);
  NetworkTopology topo;
  topo.team1 = std::move(t1);
  topo.team2 = std::move(t2);
  topo.cross_links = std::move(links);
  topo.a1 = metropolis_weights(topo.team1);
  topo.a2 = metropolis_weights(topo.team2);
  topo.to_team1 = build_cross_matrix(topo.team1, topo.team2, topo.cross_links, 1);
  topo.to_team2 = build_cross_matrix(topo.team1, topo.team2, topo.cross_links, 2);
  return topo;
}

std::vector<CrossLink> sample_cross_links(int k1, int k2, int per_direction,
                                          std::uint64_t seed) {
  if (per_direction < 1) throw std::invalid_argument("need at least one link per direction");
  rng::Stream stream(rng::stream_seed(seed, 0, 0, 1, rng::Purpose::kTopology));
  std::vector<CrossLink> links;
  std::set<std::pair<int, int>> seen;
  auto draw = [&](int src_base, int src_n, int dst_base, int dst_n) {
    const long max_pairs = static_cast<long>(src_n) * dst_n;
    int placed = 0;
    while (placed < std::min<long>(per_direction, max_pairs)) {
      int src = src_base + static_cast<int>(stream.next_below(src_n));
      int dst = dst_base + static_cast<int>(stream.next_below(dst_n));
      if (seen.insert({src, dst}).second) {
        links.push_back({src, dst});
        ++placed;
      }
    }
  };
  draw(k1, k2, 0, k1);  // team 2 -> team 1
  draw(0, k1, k1, k2);  // team 1 -> team 2
  return links;
}

double spectral_radius(int rows, int cols, std::span<const double> data) {
  if (rows != cols) throw std::invalid_argument("spectral radius needs a square matrix");
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("matrix data size mismatch");
  if (rows == 0) throw std::invalid_argument("spectral radius of an empty matrix");
  return rows <= 64 ? detail::spectral_radius_dense(rows, data)
                    : detail::spectral_radius_power(rows, data);
}

namespace detail {

double spectral_radius_dense(int n, std::span<const double> data) {
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = data[idx(r, c, n)];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigen decomposition failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// Dominant |eigenvalue| via two-step growth ratios; robust to sign-alternating
// and conjugate-pair dominance through a trailing geometric mean.
double power_dominant(const std::vector<double>& a, int n, std::vector<double>& v) {
  std::vector<double> y(n), y2(n);
  auto mul = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      const double* row = a.data() + static_cast<std::size_t>(r) * n;
      for (int c = 0; c < n; ++c) s += row[c] * x[c];
      out[r] = s;
    }
  };
  auto norm = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (double t : x) s += t * t;
    return std::sqrt(s);
  };
  double nv = norm(v);
  if (nv == 0.0) {
    v.assign(n, 1.0);
    nv = norm(v);
  }
  for (double& t : v) t /= nv;

  double est = 0.0, prev = -1.0;
  double log_acc = 0.0;
  int acc_n = 0;
  for (int it = 0; it < 20000; ++it) {
    mul(v, y);
    mul(y, y2);
    const double growth = norm(y2);  // ||A^2 v|| with ||v|| = 1
    if (growth == 0.0) return 0.0;
    const double step = std::sqrt(growth);
    log_acc += std::log(step);
    ++acc_n;
    est = (it < 32) ? step : std::exp(log_acc / acc_n);
    if (it >= 8 && std::abs(est - prev) <= 1e-12 * std::max(1.0, std::abs(est))) break;
    prev = est;
    const double n2 = norm(y2);
    for (int i = 0; i < n; ++i) v[i] = y2[i] / n2;
    if (acc_n > 256) {  // keep the running mean responsive
      log_acc = std::log(est) * 128;
      acc_n = 128;
    }
  }
  return est;
}

}  // namespace

double spectral_radius_power(int n, std::span<const double> data) {
  std::vector<double> a(data.begin(), data.end());
  // Two independent random starts guard against an initial vector that is
  // nearly orthogonal to the dominant mode. (Deflating instead would need the
  // signed eigenvalue; power_dominant only reports the magnitude, and
  // subtracting it inflates a negative dominant mode rather than removing it.)
  double best = 0.0;
  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    rng::Stream stream(
        rng::stream_seed(0xC0FFEEULL, 0, attempt, 0, rng::Purpose::kTopology));
    std::vector<double> v(n);
    for (double& t : v) t = stream.next_gaussian();
    best = std::max(best, power_dominant(a, n, v));
  }
  return best;
}

}  // namespace detail

NetworkTopology topology_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "topology file must hold a JSON object");
  for (const auto& item : j.items())
    if (item.key() != "teams" && item.key() != "cross_links")
      throw ConfigError(item.key(), "unknown key");
  if (!j.contains("teams") || !j["teams"].is_array() || j["teams"].size() != 2)
    throw ConfigError("teams", "expected an array of exactly two teams");

  TeamGraph graphs[2];
  bool have[2] = {false, false};
  for (const auto& tj : j["teams"]) {
    if (!tj.is_object()) throw ConfigError("teams", "team entries must be objects");
    for (const auto& item : tj.items())
      if (item.key() != "id" && item.key() != "size" && item.key() != "edges")
        throw ConfigError("teams." + item.key(), "unknown key");
    if (!tj.contains("id") || !tj["id"].is_number_integer())
      throw ConfigError("teams.id", "missing integer id");
    const int id = tj["id"].get<int>();
    if (id != 1 && id != 2) throw ConfigError("teams.id", "id must be 1 or 2");
    if (have[id - 1]) throw ConfigError("teams.id", "duplicate team id");
    if (!tj.contains("size") || !tj["size"].is_number_integer())
      throw ConfigError("teams.size", "missing integer size");
    const int size = tj["size"].get<int>();
    if (size < 1) throw ConfigError("teams.size", "size must be >= 1");

    TeamGraph g;
    g.team_id = id;
    g.size = size;
    g.adjacency.assign(static_cast<std::size_t>(size) * size, 0);
    for (int i = 0; i < size; ++i) g.adjacency[idx(i, i, size)] = 1;
    if (tj.contains("edges")) {
      if (!tj["edges"].is_array()) throw ConfigError("teams.edges", "expected an array");
      for (const auto& e : tj["edges"]) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
            !e[1].is_number_integer())
          throw ConfigError("teams.edges", "edges are [i, j] integer pairs");
        const int a = e[0].get<int>(), b = e[1].get<int>();
        if (a < 0 || a >= size || b < 0 || b >= size)
          throw ConfigError("teams.edges", "edge endpoint out of range");
        g.adjacency[idx(a, b, size)] = 1;
        g.adjacency[idx(b, a, size)] = 1;
      }
    }
    graphs[id - 1] = std::move(g);
    have[id - 1] = true;
  }
  if (!have[0] || !have[1]) throw ConfigError("teams", "need team ids 1 and 2");

  std::vector<CrossLink> links;
  if (j.contains("cross_links")) {
    if (!j["cross_links"].is_array()) throw ConfigError("cross_links", "expected an array");
    for (const auto& e : j["cross_links"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        throw ConfigError("cross_links", "links are [src, dst] global-id pairs");
      links.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  }
  try {
    return make_topology(std::move(graphs[0]), std::move(graphs[1]), std::move(links));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
}

nlohmann::json topology_to_json(const NetworkTopology& topo) {
  nlohmann::json j;
  j["teams"] = nlohmann::json::array();
  for (const TeamGraph* g : {&topo.team1, &topo.team2}) {
    nlohmann::json tj;
    tj["id"] = g->team_id;
    tj["size"] = g->size;
    nlohmann::json edges = nlohmann::json::array();
    for (int i = 0; i < g->size; ++i)
      for (int k = 0; k < i; ++k)
        if (g->adjacent(i, k)) edges.push_back({k, i});
    tj["edges"] = std::move(edges);
    j["teams"].push_back(std::move(tj));
  }
  nlohmann::json links = nlohmann::json::array();
  for (const CrossLink& link : topo.cross_links) links.push_back({link.src, link.dst});
  j["cross_links"] = std::move(links);
  return j;
}

TopologyReport verify_topology_properties(const TeamGraph& t1, const TeamGraph& t2,
                                          const std::vector<CrossLink>& links) {
  TopologyReport rep;
  rep.pass = true;
  auto fail = [&](const std::string& msg) {
    rep.pass = false;
    rep.failures.push_back(msg);
  };
  try {
    NetworkTopology topo = make_topology(t1, t2, links);
    rep.lambda2_team1 = topo.a1.lambda2;
    rep.lambda2_team2 = topo.a2.lambda2;
    rep.rho_into_team1 = topo.to_team1.rho_sub;
    rep.rho_into_team2 = topo.to_team2.rho_sub;
    if (!(rep.lambda2_team1 < 1.0)) fail("lambda2(team 1) must be < 1");
    if (!(rep.lambda2_team2 < 1.0)) fail("lambda2(team 2) must be < 1");
    if (!(rep.rho_into_team1 < 1.0)) fail("rho_sub(into team 1) must be < 1");
    if (!(rep.rho_into_team2 < 1.0)) fail("rho_sub(into team 2) must be < 1");
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return rep;
}

}  // namespace compdiff::graph

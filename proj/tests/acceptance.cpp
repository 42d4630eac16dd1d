// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line (details in parentheses, failures listed explicitly).
// Usage: acceptance [--cli <path-to-compdiff>] [ac1 ... ac8]
//
// Criteria that exercise the shipped binary (ac5, ac7, ac8) need --cli; the
// rest run in-process against the library.

#include <omp.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "compdiff/diagnostics.hpp"
#include "compdiff/engine.hpp"
#include "compdiff/games.hpp"
#include "compdiff/gan.hpp"
#include "compdiff/graph.hpp"
#include "compdiff/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace compdiff;

namespace {

std::string g_cli;              // path to the compdiff binary
std::vector<std::string> g_why; // failed sub-checks of the current criterion
std::vector<std::string> g_info;

bool expect(bool ok, const std::string& what) {
  if (!ok) g_why.push_back(what);
  return ok;
}

void info(const std::string& s) { g_info.push_back(s); }

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double elapsed_s(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

int spawn(const std::string& command) {
  const int rc = std::system(command.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "compdiff_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- shared experiment pieces -------------------------------------------------

la::Matrix mat(int rows, int cols, std::vector<double> v) {
  la::Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.data = std::move(v);
  return m;
}

// The stock two-team quadratic benchmark: 2-d models, identity curvature,
// half-strength coupling, zero-sum linear shifts.
games::QuadraticGame default_quadratic(double sigma) {
  games::QuadraticGame::Params p;
  p.k1 = 8;
  p.k2 = 8;
  p.p = mat(2, 2, {1.0, 0.0, 0.0, 1.0});
  p.q = mat(2, 2, {1.0, 0.0, 0.0, 1.0});
  p.c = mat(2, 2, {0.5, 0.0, 0.0, 0.5});
  p.b = {1.0, -0.5};
  p.d = {-0.5, 1.0};
  p.sigma = sigma;
  p.shift_seed = 42;
  p.shift_scale = 1.0;
  return games::QuadraticGame(std::move(p));
}

graph::NetworkTopology default_topology() {
  return graph::make_topology(
      graph::build_team_graph(graph::GraphKind::kRing, 8, 0.0, 0, 1),
      graph::build_team_graph(graph::GraphKind::kRing, 8, 0.0, 0, 2),
      {{8, 0}, {12, 4}, {0, 8}, {4, 12}});
}

engine::RunConfig default_run_config(double mu) {
  engine::RunConfig rc;
  rc.mu = mu;
  rc.horizon = 20000;
  rc.mc_runs = 100;
  rc.master_seed = 1;
  rc.init = {engine::InitSpec::Kind::kZeros, 1.0};
  rc.baseline = true;
  rc.record_every = 10;
  return rc;
}

constexpr std::int64_t kWindow = 2000;  // 10% of the 20001-point series
constexpr double kRelTol = 0.15;

// --- criteria ------------------------------------------------------------------

// Nash convergence of the stock quadratic run, step-size limited steady state.
bool ac1() {
  const auto topo = default_topology();
  const auto ct = engine::compile_topology(topo);
  const auto game = default_quadratic(0.1);
  const auto nash = games::nash_solve(game);

  engine::RunConfig rc = default_run_config(0.005);
  rc.reference = std::make_pair(nash.w1, nash.w2);

  omp_set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  const engine::RunResult res = engine::run(ct, game, rc);
  const double seconds = elapsed_s(t0);
  omp_set_num_threads(omp_get_num_procs());

  const double final_err = res.mean.nash_error.back();

  engine::RunConfig half = rc;
  half.mu = 0.0025;
  const engine::RunResult res_half = engine::run(ct, game, half);
  const double plateau_half =
      diagnostics::plateau_and_burn_in(res_half.mean.nash_error, kWindow, kRelTol).plateau;

  expect(final_err <= 1e-2, "final nash_error " + num(final_err) + " > 1e-2");
  expect(final_err <= 10.0 * plateau_half,
         "final nash_error " + num(final_err) + " > 10x half-step plateau " +
             num(plateau_half));
  expect(seconds < 60.0, "single-threaded runtime " + num(seconds) + " s >= 60 s");
  info("final nash_error " + num(final_err) + ", half-step plateau " + num(plateau_half) +
       ", " + num(seconds) + " s single-threaded");
  return g_why.empty();
}

// Steady-state disagreement envelope with the Monte-Carlo slack margin.
bool ac2() {
  const auto topo = default_topology();
  const auto ct = engine::compile_topology(topo);
  const auto game = default_quadratic(0.1);

  engine::RunConfig rc = default_run_config(0.005);
  rc.track_grad_norm = true;
  const engine::RunResult res = engine::run(ct, game, rc);

  const double noise_var = game.constants().noise_var.value;
  const double margin = 1.0 + 3.0 / std::sqrt(100.0);
  const diagnostics::BoundReport rep =
      diagnostics::check_disagreement_bound(res, topo, rc.mu, noise_var, kWindow, kRelTol, margin);
  for (int t = 0; t < 2; ++t) {
    const auto& team = rep.team[t];
    const std::string tag = "team " + std::to_string(t + 1);
    expect(team.burn_in.has_value(), tag + ": no burn-in detected");
    expect(team.holds_post_burn_in,
           tag + ": within-disagreement exceeds bound*margin past burn-in (bound " +
               num(team.bound) + ", plateau " + num(team.plateau_within) + ")");
    info(tag + ": bound " + num(team.bound) + ", margin " + num(margin) +
         ", within plateau " + num(team.plateau_within) + ", burn-in " +
         (team.burn_in ? std::to_string(*team.burn_in) : std::string("-")));
  }

  // Hand arithmetic cross-check of the envelope formula itself.
  const double hand = diagnostics::disagreement_bound(0.5, 4, 1.0, 1.0, 0.01);
  expect(std::abs(hand - 0.0012) <= 1e-15,
         "hand-evaluated bound " + num(hand) + " != 0.0012");
  info("hand check: bound(lambda2=0.5, K=4, G=1, sigma2=1, mu=0.01) = " + num(hand));
  return g_why.empty();
}

// Quadratic step-size scaling of the three plateau families. The stochastic
// term is disabled: the residual families compare update directions whose
// noise parts do not shrink with mu, so sigma = 0 isolates the claimed decay.
diagnostics::ScalingTable scaling_table() {
  const auto ct = engine::compile_topology(default_topology());
  const auto game = default_quadratic(0.0);
  engine::RunConfig rc = default_run_config(0.0);
  rc.mc_runs = 1;
  const std::vector<double> mus{0.02, 0.01, 0.005};
  return diagnostics::mu_scaling_study(ct, game, rc, mus, kWindow, kRelTol);
}

bool ac3() {
  const auto t0 = std::chrono::steady_clock::now();
  const diagnostics::ScalingTable table = scaling_table();
  const double seconds = elapsed_s(t0);
  for (const auto& r : table.ratios) {
    const std::string pair = "mu " + num(r.mu_hi) + "->" + num(r.mu_lo);
    for (int t = 0; t < 2; ++t) {
      const std::string tag = pair + " team " + std::to_string(t + 1);
      const auto in_range = [&](double v, const char* what) {
        expect(v >= 2.5 && v <= 6.0,
               tag + ": " + what + " ratio " + num(v) + " outside [2.5, 6]");
      };
      in_range(r.within[t], "within");
      in_range(r.cross_err[t], "cross");
      in_range(r.perturbation[t], "perturbation");
    }
    info(pair + ": within " + num(r.within[0]) + "/" + num(r.within[1]) + ", cross " +
         num(r.cross_err[0]) + "/" + num(r.cross_err[1]) + ", perturbation " +
         num(r.perturbation[0]) + "/" + num(r.perturbation[1]));
  }
  expect(seconds < 300.0, "sweep runtime " + num(seconds) + " s >= 5 min");
  info("sweep " + num(seconds) + " s");
  return g_why.empty();
}

// Burn-in stays far below 1/mu and at most doubles per halving.
bool ac4() {
  const diagnostics::ScalingTable table = scaling_table();
  for (const auto& row : table.rows) {
    const double cap = 0.1 / row.mu;
    for (int t = 0; t < 2; ++t) {
      const std::string tag =
          "mu " + num(row.mu) + " team " + std::to_string(t + 1);
      if (!expect(row.burn_in[t].has_value(), tag + ": no burn-in detected")) continue;
      expect(static_cast<double>(*row.burn_in[t]) <= cap,
             tag + ": burn-in " + std::to_string(*row.burn_in[t]) + " > 0.1/mu = " +
                 num(cap));
    }
    info("mu " + num(row.mu) + ": burn-in " +
         (row.burn_in[0] ? std::to_string(*row.burn_in[0]) : std::string("-")) + "/" +
         (row.burn_in[1] ? std::to_string(*row.burn_in[1]) : std::string("-")) +
         " (cap " + num(cap) + ")");
  }
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    const auto& hi = table.rows[i];
    const auto& lo = table.rows[i + 1];
    for (int t = 0; t < 2; ++t) {
      if (!hi.burn_in[t] || !lo.burn_in[t]) continue;  // reported above
      expect(*lo.burn_in[t] <= 2 * *hi.burn_in[t],
             "burn-in grew more than 2x from mu " + num(hi.mu) + " to " + num(lo.mu) +
                 " (team " + std::to_string(t + 1) + ": " + std::to_string(*hi.burn_in[t]) +
                 " -> " + std::to_string(*lo.burn_in[t]) + ")");
    }
  }
  return g_why.empty();
}

// Contraction properties across random topologies; the CLI rejects topologies
// without a cross link with exit code 3.
bool ac5() {
  rng::Stream pick(rng::stream_seed(2024, 0, 0, 0, rng::Purpose::kTopology));
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k1 = 2 + static_cast<int>(pick.next_below(15));
    const int k2 = 2 + static_cast<int>(pick.next_below(15));
    const int per = 1 + static_cast<int>(pick.next_below(3));
    const auto t1 = graph::build_team_graph(graph::GraphKind::kRandomConnected, k1, 0.3,
                                            5000 + static_cast<std::uint64_t>(trial), 1);
    const auto t2 = graph::build_team_graph(graph::GraphKind::kRandomConnected, k2, 0.3,
                                            6000 + static_cast<std::uint64_t>(trial), 2);
    const auto links =
        graph::sample_cross_links(k1, k2, per, 7000 + static_cast<std::uint64_t>(trial));
    const graph::TopologyReport rep = graph::verify_topology_properties(t1, t2, links);
    bool ok = rep.pass && rep.lambda2_team1 < 1.0 && rep.lambda2_team2 < 1.0 &&
              rep.rho_into_team1 < 1.0 && rep.rho_into_team2 < 1.0;
    if (!expect(ok, "random topology " + std::to_string(trial) +
                        " failed the contraction checks")) {
      for (const auto& f : rep.failures) g_why.push_back("  " + f);
      return false;
    }
    ++checked;
  }
  info(std::to_string(checked) + " random topologies: lambda2 < 1 and rho_sub < 1");

  if (!expect(!g_cli.empty(), "--cli not given; cannot exercise verify-graph")) return false;
  const fs::path dir = scratch_dir("ac5");

  const auto good_topo = graph::make_topology(
      graph::build_team_graph(graph::GraphKind::kRing, 4, 0.0, 0, 1),
      graph::build_team_graph(graph::GraphKind::kRing, 4, 0.0, 0, 2), {{4, 0}, {0, 4}});
  std::ofstream(dir / "good.json") << graph::topology_to_json(good_topo).dump(2);
  const int rc_good = spawn("\"" + g_cli + "\" verify-graph \"" + (dir / "good.json").string() +
                            "\" > \"" + (dir / "good.out").string() + "\" 2>&1");
  expect(rc_good == 0, "verify-graph on a valid topology exited " + std::to_string(rc_good));

  auto no_links = graph::topology_to_json(good_topo);
  no_links["cross_links"] = nlohmann::json::array();
  std::ofstream(dir / "nolinks.json") << no_links.dump(2);
  const int rc_none = spawn("\"" + g_cli + "\" verify-graph \"" +
                            (dir / "nolinks.json").string() + "\" > \"" +
                            (dir / "nolinks.out").string() + "\" 2>&1");
  expect(rc_none == 3,
         "verify-graph without cross links exited " + std::to_string(rc_none) + ", want 3");

  auto one_way = graph::topology_to_json(good_topo);
  one_way["cross_links"] = nlohmann::json::array({nlohmann::json::array({8 - 4, 0})});
  std::ofstream(dir / "oneway.json") << one_way.dump(2);
  const int rc_oneway = spawn("\"" + g_cli + "\" verify-graph \"" +
                              (dir / "oneway.json").string() + "\" > \"" +
                              (dir / "oneway.out").string() + "\" 2>&1");
  expect(rc_oneway == 3,
         "verify-graph with a one-way link exited " + std::to_string(rc_oneway) + ", want 3");
  return g_why.empty();
}

// Exact reductions: singleton teams follow the two-player recursion; zero
// coupling makes team 1 indistinguishable from single-team diffusion.
bool ac6() {
  {
    const auto ct = engine::compile_topology(graph::make_topology(
        graph::build_team_graph(graph::GraphKind::kRing, 1, 0.0, 0, 1),
        graph::build_team_graph(graph::GraphKind::kRing, 1, 0.0, 0, 2), {{1, 0}, {0, 1}}));
    games::QuadraticGame::Params p;
    p.k1 = 1;
    p.k2 = 1;
    p.p = mat(1, 1, {1.0});
    p.q = mat(1, 1, {1.0});
    p.c = mat(1, 1, {1.0});
    p.b = {1.0};
    p.d = {-1.0};
    const games::QuadraticGame game{std::move(p)};
    const double mu = 0.1;
    engine::NetworkState state =
        engine::make_initial_state(ct, game, {engine::InitSpec::Kind::kGaussian, 1.0}, 11, 0);
    double w1 = state.own(1, 0)[0], w2 = state.own(2, 0)[0];
    double e1 = state.est(1, 0)[0], e2 = state.est(2, 0)[0];
    engine::NetworkState next;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      engine::diffusion_step(state, next, ct, game, mu, 11, 0);
      std::swap(state, next);
      const double nw1 = w1 - mu * (w1 + e1 + 1.0);
      const double nw2 = w2 - mu * (w2 - e2 + 1.0);
      const double ne1 = 0.5 * (e1 + w2);
      const double ne2 = 0.5 * (e2 + w1);
      w1 = nw1;
      w2 = nw2;
      e1 = ne1;
      e2 = ne2;
      worst = std::max({worst, std::abs(state.own(1, 0)[0] - w1),
                        std::abs(state.own(2, 0)[0] - w2),
                        std::abs(state.est(1, 0)[0] - e1),
                        std::abs(state.est(2, 0)[0] - e2)});
    }
    expect(worst <= 1e-12, "singleton-team trajectory deviates from the reference by " +
                               num(worst));
    info("singleton reduction: max deviation " + num(worst) + " over 1000 steps");
  }

  {
    // C = 0 with noise and shifts: team 1 must evolve exactly like a
    // single-team diffusion network on its own cost.
    const auto topo = default_topology();
    const auto ct = engine::compile_topology(topo);
    games::QuadraticGame::Params p;
    p.k1 = 8;
    p.k2 = 8;
    p.p = mat(2, 2, {1.0, 0.0, 0.0, 1.0});
    p.q = mat(2, 2, {1.0, 0.0, 0.0, 1.0});
    p.c = mat(2, 2, {0.0, 0.0, 0.0, 0.0});
    p.b = {1.0, -0.5};
    p.d = {-0.5, 1.0};
    p.sigma = 0.1;
    p.shift_seed = 42;
    const games::QuadraticGame game{std::move(p)};
    const double mu = 0.01;
    const std::uint64_t seed = 9;

    engine::NetworkState state =
        engine::make_initial_state(ct, game, {engine::InitSpec::Kind::kGaussian, 1.0}, seed, 0);
    // Reference network: team 1 agents only, same weights, same noise streams.
    std::vector<std::array<double, 2>> w(8), phi(8), wn(8);
    for (int k = 0; k < 8; ++k) {
      w[k] = {state.own(1, k)[0], state.own(1, k)[1]};
    }
    engine::NetworkState next;
    const std::vector<double> dummy_other{0.0, 0.0};
    std::vector<double> g(2);
    double worst = 0.0;
    for (std::int64_t i = 1; i <= 1000; ++i) {
      engine::diffusion_step(state, next, ct, game, mu, seed, 0);
      std::swap(state, next);
      for (int k = 0; k < 8; ++k) {
        rng::Stream stream(rng::stream_seed(seed, 0, k, i, rng::Purpose::kGradNoise));
        game.stoch_grad(1, k, std::span<const double>(w[k].data(), 2), dummy_other, stream, g);
        phi[k] = {w[k][0] - mu * g[0], w[k][1] - mu * g[1]};
      }
      for (int k = 0; k < 8; ++k) {
        wn[k] = {0.0, 0.0};
        for (const auto& [src, weight] : ct.combine[0][k]) {
          wn[k][0] += weight * phi[src][0];
          wn[k][1] += weight * phi[src][1];
        }
      }
      w = wn;
      for (int k = 0; k < 8; ++k) {
        worst = std::max({worst, std::abs(state.own(1, k)[0] - w[k][0]),
                          std::abs(state.own(1, k)[1] - w[k][1])});
      }
    }
    expect(worst <= 1e-12,
           "decoupled team-1 trajectory deviates from single-team diffusion by " + num(worst));
    info("zero-coupling reduction: max deviation " + num(worst) + " over 1000 steps");
  }
  return g_why.empty();
}

// Reruns are byte-identical; agent processing order is immaterial.
bool ac7() {
  if (!expect(!g_cli.empty(), "--cli not given; cannot rerun the binary")) return false;
  const fs::path dir = scratch_dir("ac7");
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
  "game": {
    "type": "quadratic",
    "P": [[1.0, 0.0], [0.0, 1.0]],
    "Q": [[1.0, 0.0], [0.0, 1.0]],
    "C": [[0.5, 0.0], [0.0, 0.5]],
    "b": [1.0, -0.5],
    "c": [-0.5, 1.0],
    "sigma": 0.1,
    "shift_seed": 42
  },
  "topology": {
    "team1": {"kind": "ring", "size": 4},
    "team2": {"kind": "ring", "size": 4},
    "cross_links": [[4, 0], [0, 4]]
  },
  "engine": {"mu": 0.01, "horizon": 300, "mc_runs": 5, "master_seed": 1},
  "diagnostics": {"record_every": 10}
})";
  for (const char* sub : {"a", "b"}) {
    const int rc = spawn("\"" + g_cli + "\" run-quadratic --config \"" + cfg.string() +
                         "\" --out \"" + (dir / sub).string() + "\" > \"" +
                         (dir / (std::string(sub) + ".out")).string() + "\" 2>&1");
    if (!expect(rc == 0, std::string("run-quadratic (") + sub + ") exited " +
                             std::to_string(rc)))
      return false;
  }
  const std::string csv_a = read_file(dir / "a" / "metrics.csv");
  const std::string csv_b = read_file(dir / "b" / "metrics.csv");
  expect(!csv_a.empty(), "first run produced an empty metrics.csv");
  expect(csv_a == csv_b, "metrics.csv differs between identical reruns");
  // The summaries echo their own --out directory; everything else must match.
  auto sum_a = nlohmann::json::parse(read_file(dir / "a" / "summary.json"));
  auto sum_b = nlohmann::json::parse(read_file(dir / "b" / "summary.json"));
  sum_a["config"]["output"]["dir"] = "";
  sum_b["config"]["output"]["dir"] = "";
  expect(sum_a == sum_b, "summary.json differs between identical reruns");
  info("metrics.csv " + std::to_string(csv_a.size()) + " bytes, reruns identical");

  // Agent processing order: forward, reverse and shuffled must agree bitwise.
  const auto ct = engine::compile_topology(default_topology());
  const auto game = default_quadratic(0.1);
  engine::NetworkState state = engine::make_initial_state(
      ct, game, {engine::InitSpec::Kind::kGaussian, 1.0}, 3, 0);
  std::vector<int> order(16);
  for (int i = 0; i < 16; ++i) order[static_cast<std::size_t>(i)] = i;
  engine::NetworkState a, b;
  for (int step = 0; step < 20; ++step) {
    engine::diffusion_step_ordered(state, a, ct, game, 0.01, 3, 0, order);
    std::vector<int> shuffled = order;
    rng::Stream sh(rng::stream_seed(55, step, 0, 0, rng::Purpose::kEval));
    for (int i = 15; i > 0; --i)
      std::swap(shuffled[static_cast<std::size_t>(i)],
                shuffled[static_cast<std::size_t>(sh.next_below(static_cast<std::uint64_t>(i + 1)))]);
    engine::diffusion_step_ordered(state, b, ct, game, 0.01, 3, 0, shuffled);
    const bool same = a.own1 == b.own1 && a.own2 == b.own2 && a.est1 == b.est1 &&
                      a.est2 == b.est2;
    if (!expect(same, "agent order changed the state at step " + std::to_string(step)))
      return false;
    std::swap(state, a);
  }
  info("20 steps x random agent permutations: states identical");
  return g_why.empty();
}

// GAN training run: gradient correctness, discriminator equilibrium band,
// generator mean recovery, exact zero-sum losses.
bool ac8() {
  // (a) backprop against central finite differences at the shipped scale.
  gan::GanGame::Params gp;
  gp.k1 = 4;
  gp.k2 = 4;
  gp.gen = gan::MlpArch{2, 16, 2};
  gp.disc = gan::MlpArch{2, 16, 1};
  gp.batch_size = 32;
  gp.eps_log = 1e-6;
  gp.target.means = {{1.0, 0.5}};
  gp.target.variances = {0.3};
  gp.target.weights = {1.0};
  gp.jitter_scale = 0.05;
  gp.jitter_seed = 7;
  const gan::GanGame game(gp);
  for (std::uint64_t draw = 0; draw < 3; ++draw) {
    std::vector<double> disc(static_cast<std::size_t>(gp.disc.params()));
    std::vector<double> gen(static_cast<std::size_t>(gp.gen.params()));
    rng::Stream ps(rng::stream_seed(900 + draw, 0, 0, 0, rng::Purpose::kInit));
    for (auto& v : disc) v = 0.3 * ps.next_gaussian();
    for (auto& v : gen) v = 0.3 * ps.next_gaussian();
    rng::Stream bs(rng::stream_seed(910 + draw, 0, 0, 0, rng::Purpose::kGradNoise));
    std::vector<double> zb, db;
    game.draw_z_batch(bs, gp.batch_size, zb);
    game.draw_data_batch(bs, 0, gp.batch_size, db);
    const double h = 1e-6;
    for (int team = 1; team <= 2; ++team) {
      std::vector<double>& own = team == 1 ? disc : gen;
      std::vector<double> grad(own.size());
      game.batch_grad(team, own, team == 1 ? gen : disc, zb, db, gp.batch_size, grad);
      double num_acc = 0.0, den_acc = 0.0;
      for (std::size_t i = 0; i < own.size(); ++i) {
        const double keep = own[i];
        own[i] = keep + h;
        const double up = game.batch_value(disc, gen, zb, db, gp.batch_size);
        own[i] = keep - h;
        const double dn = game.batch_value(disc, gen, zb, db, gp.batch_size);
        own[i] = keep;
        const double fd = (team == 1 ? -1.0 : 1.0) * (up - dn) / (2.0 * h);
        num_acc += (grad[i] - fd) * (grad[i] - fd);
        den_acc += fd * fd;
      }
      const double rel = std::sqrt(num_acc) / std::max(1e-12, std::sqrt(den_acc));
      if (!expect(rel <= 1e-4, "finite-difference mismatch " + num(rel) + " (team " +
                                   std::to_string(team) + ", draw " +
                                   std::to_string(draw) + ")"))
        return false;
    }
  }
  info("backprop matches finite differences on 3 draws, both teams");

  // (b)-(d) via the shipped binary on the stock GAN configuration.
  if (!expect(!g_cli.empty(), "--cli not given; cannot run the training binary")) return false;
  const fs::path dir = scratch_dir("ac8");
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
  "game": {
    "type": "gan",
    "noise_dim": 2,
    "data_dim": 2,
    "hidden_gen": 16,
    "hidden_disc": 16,
    "batch_size": 32,
    "eps_log": 1e-6,
    "target": {"means": [[1.0, 0.5]], "variances": [0.3], "weights": [1.0]},
    "jitter_scale": 0.05,
    "jitter_seed": 7
  },
  "topology": {
    "team1": {"kind": "ring", "size": 4},
    "team2": {"kind": "ring", "size": 4},
    "cross_links": [[4, 0], [6, 2], [0, 4], [2, 6]]
  },
  "engine": {
    "mu": 0.01,
    "horizon": 30000,
    "mc_runs": 1,
    "master_seed": 1,
    "init": {"kind": "gaussian", "scale": 0.2}
  },
  "diagnostics": {"record_every": 100}
})";
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = spawn("\"" + g_cli + "\" run-gan --config \"" + cfg.string() +
                       "\" --out \"" + (dir / "out").string() + "\" > \"" +
                       (dir / "run.out").string() + "\" 2>&1");
  const double seconds = elapsed_s(t0);
  if (!expect(rc == 0, "run-gan exited " + std::to_string(rc))) return false;
  expect(seconds < 180.0, "training runtime " + num(seconds) + " s >= 3 min");

  const std::string csv = read_file(dir / "out" / "metrics.csv");
  if (!expect(!csv.empty(), "metrics.csv missing or empty")) return false;

  // Parse by header name so the check is independent of column order.
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // schema comment
  std::getline(lines, line);  // header
  std::vector<std::string> cols;
  {
    std::istringstream hdr(line);
    std::string c;
    while (std::getline(hdr, c, ',')) cols.push_back(c);
  }
  const auto col = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    return it == cols.end() ? -1 : static_cast<int>(it - cols.begin());
  };
  const int c_iter = col("iter"), c_ld = col("loss_disc"), c_lg = col("loss_gen");
  const int c_dreal = col("d_real"), c_g0 = col("gen_mean_0"), c_g1 = col("gen_mean_1");
  if (!expect(c_iter >= 0 && c_ld >= 0 && c_lg >= 0 && c_dreal >= 0 && c_g0 >= 0 &&
                  c_g1 >= 0,
              "metrics.csv misses expected GAN columns"))
    return false;

  int rows = 0, tail_rows = 0, zero_sum_violations = 0;
  double tail_dreal = 0.0, tail_g0 = 0.0, tail_g1 = 0.0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    while (cells.size() < cols.size()) cells.push_back("");  // trailing empties
    ++rows;
    const std::int64_t iter = std::stoll(cells[static_cast<std::size_t>(c_iter)]);
    const double ld = std::stod(cells[static_cast<std::size_t>(c_ld)]);
    const double lg = std::stod(cells[static_cast<std::size_t>(c_lg)]);
    if (ld + lg != 0.0) ++zero_sum_violations;
    if (iter >= 27000) {  // final 10% of a 30000-iteration run
      ++tail_rows;
      tail_dreal += std::stod(cells[static_cast<std::size_t>(c_dreal)]);
      tail_g0 += std::stod(cells[static_cast<std::size_t>(c_g0)]);
      tail_g1 += std::stod(cells[static_cast<std::size_t>(c_g1)]);
    }
  }
  expect(rows > 0, "no data rows in metrics.csv");
  expect(zero_sum_violations == 0, std::to_string(zero_sum_violations) +
                                       " rows with loss_disc + loss_gen != 0");
  if (!expect(tail_rows > 0, "no rows in the final 10% of iterations")) return false;
  const double mean_dreal = tail_dreal / tail_rows;
  const double mean_g0 = tail_g0 / tail_rows;
  const double mean_g1 = tail_g1 / tail_rows;
  expect(mean_dreal >= 0.35 && mean_dreal <= 0.65,
         "mean d_real over the last 10% is " + num(mean_dreal) + ", outside [0.35, 0.65]");
  expect(std::abs(mean_g0 - 1.0) <= 0.25,
         "generated mean coordinate 0 is " + num(mean_g0) + ", target 1.0 +- 0.25");
  expect(std::abs(mean_g1 - 0.5) <= 0.25,
         "generated mean coordinate 1 is " + num(mean_g1) + ", target 0.5 +- 0.25");
  info("d_real tail mean " + num(mean_dreal) + ", generated mean (" + num(mean_g0) + ", " +
       num(mean_g1) + "), " + num(seconds) + " s");
  return g_why.empty();
}

struct Criterion {
  const char* id;
  const char* what;
  bool (*fn)();
};

const Criterion kCriteria[] = {
    {"ac1", "quadratic run converges to the equilibrium", ac1},
    {"ac2", "within-team disagreement respects the envelope", ac2},
    {"ac3", "plateaus scale as the squared step size", ac3},
    {"ac4", "burn-in stays short and grows sub-linearly", ac4},
    {"ac5", "topology assumptions verified, violations exit 3", ac5},
    {"ac6", "singleton and zero-coupling reductions are exact", ac6},
    {"ac7", "reruns and agent orderings are bit-identical", ac7},
    {"ac8", "gan gradients, equilibrium band and zero-sum losses", ac8},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) {
      g_cli = argv[++i];
    } else {
      wanted.push_back(arg);
    }
  }

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), c.id) == wanted.end())
      continue;
    g_why.clear();
    g_info.clear();
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      g_why.push_back(std::string("exception: ") + e.what());
    }
    std::string line = std::string(ok ? "PASS" : "FAIL") + " " + c.id + ": " + c.what;
    if (ok && !g_info.empty()) {
      line += " (";
      for (std::size_t i = 0; i < g_info.size(); ++i)
        line += (i ? "; " : "") + g_info[i];
      line += ")";
    }
    std::cout << line << "\n";
    if (!ok) {
      for (const auto& why : g_why) std::cout << "  - " << why << "\n";
      for (const auto& extra : g_info) std::cout << "  note: " << extra << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "compdiff/config.hpp"
#include "compdiff/diagnostics.hpp"
#include "compdiff/engine.hpp"
#include "compdiff/errors.hpp"
#include "compdiff/gan.hpp"
#include "compdiff/graph.hpp"
#include "compdiff/report.hpp"

namespace {

using namespace compdiff;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;       // bad flags or configuration
constexpr int kExitDivergence = 2;  // iterates turned non-finite
constexpr int kExitAssumption = 3;  // topology violates the algorithm's requirements
constexpr int kExitIo = 4;          // file system failures

struct CommonOptions {
  std::string config_file;
  std::string out_dir;  // empty: take the config's output.dir
  std::optional<double> mu;
  std::optional<std::int64_t> horizon;
  std::optional<int> mc_runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> record_every;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_file, "experiment configuration (JSON)")
      ->required();
  cmd->add_option("--out", opt.out_dir, "output directory (overrides the config)");
  cmd->add_option("--mu", opt.mu, "step size override");
  cmd->add_option("--horizon", opt.horizon, "iteration count override");
  cmd->add_option("--mc-runs", opt.mc_runs, "Monte-Carlo run count override");
  cmd->add_option("--seed", opt.seed, "master seed override");
  cmd->add_option("--record-every", opt.record_every, "metrics thinning override");
}

config::ExperimentConfig load_with_overrides(const CommonOptions& opt) {
  config::ExperimentConfig cfg = config::load_config(opt.config_file);
  if (opt.mu) {
    if (!(*opt.mu > 0.0)) throw ConfigError("engine.mu", "must be > 0");
    cfg.engine.mu = *opt.mu;
  }
  if (opt.horizon) {
    if (*opt.horizon < 0) throw ConfigError("engine.horizon", "must be >= 0");
    cfg.engine.horizon = *opt.horizon;
  }
  if (opt.mc_runs) {
    if (*opt.mc_runs < 1) throw ConfigError("engine.mc_runs", "must be >= 1");
    cfg.engine.mc_runs = *opt.mc_runs;
  }
  if (opt.seed) cfg.engine.master_seed = *opt.seed;
  if (opt.record_every) {
    if (*opt.record_every < 1) throw ConfigError("diagnostics.record_every", "must be >= 1");
    cfg.diagnostics.record_every = *opt.record_every;
  }
  if (!opt.out_dir.empty()) cfg.output.dir = opt.out_dir;
  return cfg;
}

// Throws AssumptionViolation when the derived matrices are not contracting;
// construction itself already throws when a team receives no cross link.
void require_assumptions(const graph::NetworkTopology& topo) {
  const graph::TopologyReport rep =
      graph::verify_topology_properties(topo.team1, topo.team2, topo.cross_links);
  if (!rep.pass) {
    std::string msg = "Assumption 1 violated:";
    for (const std::string& f : rep.failures) msg += " " + f + ";";
    throw AssumptionViolation(msg);
  }
}

void write_outputs(const config::ExperimentConfig& cfg, const engine::RunResult& result,
                   const report::SummaryInputs& inputs) {
  namespace fs = std::filesystem;
  if (!cfg.output.csv && !cfg.output.summary) return;
  std::error_code ec;
  fs::create_directories(cfg.output.dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + cfg.output.dir + ": " +
                             ec.message());
  if (cfg.output.csv) {
    const fs::path p = fs::path(cfg.output.dir) / "metrics.csv";
    report::atomic_write(p, report::metrics_csv(result, cfg));
    std::printf("wrote %s\n", p.c_str());
  }
  if (cfg.output.summary) {
    const fs::path p = fs::path(cfg.output.dir) / "summary.json";
    report::atomic_write(p, report::build_summary(inputs).dump(2) + "\n");
    std::printf("wrote %s\n", p.c_str());
  }
}

void print_team_spectra(const graph::NetworkTopology& topo) {
  std::printf("team 1: K=%d  lambda2=%.6f   estimate fusion into it: rho_sub=%.6f\n",
              topo.team1.size, topo.a1.lambda2, topo.to_team1.rho_sub);
  std::printf("team 2: K=%d  lambda2=%.6f   estimate fusion into it: rho_sub=%.6f\n",
              topo.team2.size, topo.a2.lambda2, topo.to_team2.rho_sub);
}

int cmd_verify_graph(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open topology file: " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  graph::NetworkTopology topo;
  try {
    topo = graph::topology_from_json(j);
  } catch (const AssumptionViolation& e) {
    std::printf("Assumption 1 check: FAIL (%s)\n", e.what());
    return kExitAssumption;
  }
  print_team_spectra(topo);
  const graph::TopologyReport rep =
      graph::verify_topology_properties(topo.team1, topo.team2, topo.cross_links);
  if (!rep.pass) {
    for (const std::string& f : rep.failures)
      std::printf("Assumption 1 check: FAIL (%s)\n", f.c_str());
    return kExitAssumption;
  }
  std::printf("Assumption 1 check: PASS\n");
  return kExitOk;
}

int cmd_run_quadratic(const CommonOptions& opt) {
  config::ExperimentConfig cfg = load_with_overrides(opt);
  if (cfg.game_type != config::GameType::kQuadratic)
    throw ConfigError("game.type", "run-quadratic needs a quadratic game config");
  const graph::NetworkTopology topo = config::build_topology(cfg.topology);
  require_assumptions(topo);
  const engine::CompiledTopology ct = engine::compile_topology(topo);
  const auto game = config::build_game(cfg, topo.team1.size, topo.team2.size);
  const auto& quad = dynamic_cast<const games::QuadraticGame&>(*game);
  const games::NashPoint nash = games::nash_solve(quad);

  engine::RunConfig rc;
  rc.mu = cfg.engine.mu;
  rc.horizon = cfg.engine.horizon;
  rc.mc_runs = cfg.engine.mc_runs;
  rc.master_seed = cfg.engine.master_seed;
  rc.init = cfg.engine.init;
  rc.baseline = cfg.baseline_enabled();
  rc.track_grad_norm = true;
  rc.record_every = cfg.diagnostics.record_every;
  rc.reference = {nash.w1, nash.w2};

  print_team_spectra(topo);
  const engine::RunResult result = engine::run(ct, *game, rc);

  const std::int64_t window =
      config::effective_window(cfg.diagnostics, cfg.engine.horizon + 1);
  const double margin = 1.0 + 3.0 / std::sqrt(static_cast<double>(rc.mc_runs));
  const diagnostics::BoundReport bound = diagnostics::check_disagreement_bound(
      result, topo, rc.mu, quad.params().sigma * quad.params().sigma, window,
      cfg.diagnostics.rel_tol, margin);

  for (int t = 0; t < 2; ++t) {
    const diagnostics::TeamBoundCheck& c = bound.team[t];
    std::printf("team %d: disagreement bound=%.3e  plateau(within)=%.3e  "
                "plateau(cross)=%.3e  burn_in=%s\n",
                t + 1, c.bound, c.plateau_within, c.plateau_cross,
                c.burn_in ? std::to_string(*c.burn_in).c_str() : "not reached");
    std::printf("team %d disagreement-bound check (margin %.2f): %s\n", t + 1, margin,
                c.holds_post_burn_in ? "PASS" : "FAIL");
  }
  if (!result.mean.nash_error.empty())
    std::printf("final squared distance to equilibrium: %.6e\n",
                result.mean.nash_error.back());

  report::SummaryInputs inputs;
  inputs.cfg = &cfg;
  inputs.topo = &topo;
  inputs.result = &result;
  inputs.bound = bound;
  inputs.nash = nash;
  write_outputs(cfg, result, inputs);
  return kExitOk;
}

engine::GanMetrics eval_gan(const gan::GanGame& game, const engine::NetworkState& state,
                            std::uint64_t master_seed, int run, std::int64_t iter) {
  constexpr int kEvalBatch = 512;
  rng::Stream stream(rng::stream_seed(master_seed, run, 0, iter, rng::Purpose::kEval));
  std::vector<double> z, data;
  game.draw_z_batch(stream, kEvalBatch, z);
  game.draw_data_batch(stream, -1, kEvalBatch, data);
  const std::vector<double> disc = engine::team_centroid(state, 1);
  const std::vector<double> gen = engine::team_centroid(state, 2);
  const gan::GanGame::EvalStats stats = game.evaluate(disc, gen, z, data, kEvalBatch);
  engine::GanMetrics m;
  m.loss_gen = stats.value;
  m.loss_disc = -stats.value;  // exact negation: the losses cancel bitwise
  m.d_real = stats.d_real;
  m.d_fake = stats.d_fake;
  m.gen_mean = stats.gen_mean;
  return m;
}

int cmd_run_gan(const CommonOptions& opt) {
  config::ExperimentConfig cfg = load_with_overrides(opt);
  if (cfg.game_type != config::GameType::kGan)
    throw ConfigError("game.type", "run-gan needs a gan game config");
  const graph::NetworkTopology topo = config::build_topology(cfg.topology);
  require_assumptions(topo);
  const engine::CompiledTopology ct = engine::compile_topology(topo);
  const auto game = config::build_game(cfg, topo.team1.size, topo.team2.size);
  const auto& gg = dynamic_cast<const gan::GanGame&>(*game);

  engine::RunConfig rc;
  rc.mu = cfg.engine.mu;
  rc.horizon = cfg.engine.horizon;
  rc.mc_runs = cfg.engine.mc_runs;
  rc.master_seed = cfg.engine.master_seed;
  rc.init = cfg.engine.init;
  rc.baseline = cfg.baseline_enabled();
  rc.record_every = cfg.diagnostics.record_every;
  rc.extra_metrics = [&gg, seed = rc.master_seed](int run, const engine::NetworkState& s,
                                                  engine::MetricsRecord& rec) {
    rec.gan = eval_gan(gg, s, seed, run, s.iter);
  };

  print_team_spectra(topo);
  const engine::RunResult result = engine::run(ct, *game, rc);

  report::SummaryInputs inputs;
  inputs.cfg = &cfg;
  inputs.topo = &topo;
  inputs.result = &result;
  if (!result.records.empty() && result.records.back().gan) {
    inputs.gan_final = result.records.back().gan;
    const engine::GanMetrics& m = *inputs.gan_final;
    std::printf("final: loss_disc=%.4f loss_gen=%.4f d_real=%.4f d_fake=%.4f\n",
                m.loss_disc, m.loss_gen, m.d_real, m.d_fake);
    std::printf("final generator sample mean:");
    for (double v : m.gen_mean) std::printf(" %.4f", v);
    std::printf("  (target mixture mean:");
    for (double v : gg.params().target.mean()) std::printf(" %.4f", v);
    std::printf(")\n");
  }
  write_outputs(cfg, result, inputs);
  return kExitOk;
}

int cmd_sweep_mu(const CommonOptions& opt, const std::string& mus_arg) {
  config::ExperimentConfig cfg = load_with_overrides(opt);
  if (cfg.game_type != config::GameType::kQuadratic)
    throw ConfigError("game.type", "sweep-mu needs a quadratic game config");
  std::vector<double> mus;
  {
    std::string token;
    std::istringstream ss(mus_arg);
    while (std::getline(ss, token, ',')) {
      try {
        mus.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw ConfigError("", "--mus expects a comma-separated list of numbers");
      }
    }
  }
  if (mus.size() < 2) throw ConfigError("", "--mus needs at least two step sizes");

  const graph::NetworkTopology topo = config::build_topology(cfg.topology);
  require_assumptions(topo);
  const engine::CompiledTopology ct = engine::compile_topology(topo);
  const auto game = config::build_game(cfg, topo.team1.size, topo.team2.size);
  const auto& quad = dynamic_cast<const games::QuadraticGame&>(*game);
  const games::NashPoint nash = games::nash_solve(quad);

  engine::RunConfig rc;
  rc.horizon = cfg.engine.horizon;
  rc.mc_runs = cfg.engine.mc_runs;
  rc.master_seed = cfg.engine.master_seed;
  rc.init = cfg.engine.init;
  rc.baseline = true;
  rc.record_every = cfg.diagnostics.record_every;
  rc.reference = {nash.w1, nash.w2};

  const std::int64_t window =
      config::effective_window(cfg.diagnostics, cfg.engine.horizon + 1);
  diagnostics::ScalingTable table;
  try {
    table = diagnostics::mu_scaling_study(ct, *game, rc, mus, window,
                                          cfg.diagnostics.rel_tol);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }

  std::printf("%-10s %-12s %-12s %-12s %-12s %-12s %-12s\n", "mu", "within1", "within2",
              "cross1", "cross2", "pert1", "pert2");
  for (const diagnostics::ScalingRow& row : table.rows)
    std::printf("%-10.5g %-12.4e %-12.4e %-12.4e %-12.4e %-12.4e %-12.4e\n", row.mu,
                row.plateau_within[0], row.plateau_within[1], row.plateau_cross[0],
                row.plateau_cross[1], row.plateau_perturbation[0],
                row.plateau_perturbation[1]);
  for (const diagnostics::ScalingRatios& r : table.ratios)
    std::printf("mu %.5g -> %.5g: plateau ratios within=(%.2f, %.2f) cross=(%.2f, %.2f) "
                "perturbation=(%.2f, %.2f)\n",
                r.mu_hi, r.mu_lo, r.within[0], r.within[1], r.cross_err[0], r.cross_err[1],
                r.perturbation[0], r.perturbation[1]);

  report::SummaryInputs inputs;
  inputs.cfg = &cfg;
  inputs.topo = &topo;
  inputs.scaling = table;
  inputs.nash = nash;
  if (cfg.output.summary) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output.dir, ec);
    if (ec)
      throw std::runtime_error("cannot create output directory " + cfg.output.dir + ": " +
                               ec.message());
    const std::filesystem::path p = std::filesystem::path(cfg.output.dir) / "summary.json";
    report::atomic_write(p, report::build_summary(inputs).dump(2) + "\n");
    std::printf("wrote %s\n", p.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-team competing-diffusion simulator"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (0 = library default)");

  std::string topology_file;
  CLI::App* verify = app.add_subcommand(
      "verify-graph", "check a topology file against the algorithm's requirements");
  verify->add_option("file", topology_file, "topology JSON")->required();

  CommonOptions quad_opt;
  CLI::App* quad = app.add_subcommand(
      "run-quadratic", "simulate the quadratic game and check the disagreement bound");
  add_common(quad, quad_opt);

  CommonOptions gan_opt;
  CLI::App* gan_cmd =
      app.add_subcommand("run-gan", "train the distributed GAN formulation");
  add_common(gan_cmd, gan_opt);

  CommonOptions sweep_opt;
  std::string mus_arg;
  CLI::App* sweep = app.add_subcommand(
      "sweep-mu", "plateau scaling across a halving step-size ladder");
  add_common(sweep, sweep_opt);
  sweep->add_option("--mus", mus_arg, "comma-separated step sizes, e.g. 0.02,0.01,0.005")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (verify->parsed()) return cmd_verify_graph(topology_file);
    if (quad->parsed()) return cmd_run_quadratic(quad_opt);
    if (gan_cmd->parsed()) return cmd_run_gan(gan_opt);
    if (sweep->parsed()) return cmd_sweep_mu(sweep_opt, mus_arg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitUsage;
  } catch (const AssumptionViolation& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitAssumption;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s (run %d)\n", e.what(), e.run());
    return kExitDivergence;
  } catch (const DegenerateGameError& e) {
    std::fprintf(stderr, "degenerate game: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid value: %s\n", e.what());
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitOk;
}

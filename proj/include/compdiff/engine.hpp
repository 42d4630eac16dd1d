#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "compdiff/games.hpp"
#include "compdiff/graph.hpp"

namespace compdiff::engine {

// Topology compiled to weighted adjacency lists for the step kernels.
struct CompiledTopology {
  int k1 = 0, k2 = 0;
  // combine[t][k]: (source local index, weight) for the within-team average.
  std::array<std::vector<std::vector<std::pair<int, double>>>, 2> combine;
  // cross[t][k]: (source global index, weight) for the estimate fusion.
  std::array<std::vector<std::vector<std::pair<int, double>>>, 2> cross;

  int team_size(int team) const { return team == 1 ? k1 : k2; }
  int total_agents() const { return k1 + k2; }
};

CompiledTopology compile_topology(const graph::NetworkTopology& topo);

// Full synchronous snapshot of every agent. `own` holds each agent's model of
// its team variable, `est` its estimate of the opposing team's variable.
struct NetworkState {
  std::int64_t iter = 0;
  int k1 = 0, k2 = 0, m1 = 0, m2 = 0;
  std::vector<double> own1, est1;  // k1 x m1, k1 x m2
  std::vector<double> own2, est2;  // k2 x m2, k2 x m1

  std::span<double> own(int team, int local);
  std::span<const double> own(int team, int local) const;
  std::span<double> est(int team, int local);
  std::span<const double> est(int team, int local) const;
  int own_dim(int team) const { return team == 1 ? m1 : m2; }
  int est_dim(int team) const { return team == 1 ? m2 : m1; }
};

struct InitSpec {
  enum class Kind { kZeros, kGaussian } kind = Kind::kZeros;
  double scale = 1.0;
};

NetworkState make_initial_state(const CompiledTopology& topo, const games::GameOracle& game,
                                const InitSpec& init, std::uint64_t master_seed, int run);

// How one step executes; both orders produce bit-identical states because all
// reads come from the previous snapshot and writes are per-agent private.
enum class StepMode { kSerial, kParallelAgents };

struct StepOptions {
  StepMode mode = StepMode::kSerial;
  // Optional per-step residual against the team-averaged update direction,
  // re-evaluated at each agent's own iterates with replayed noise:
  //   mu * d_k = w_k(i) - w_k(i-1) + (mu/K_t) * sum_k' g_k'(own_k, est_k).
  // Writes max_k ||d_k||^2 per team.
  std::array<double, 2>* perturbation_out = nullptr;
  // Max true-gradient norm per team at the pre-step iterates (for bound
  // evaluation). Adds one local_grad call per agent.
  std::array<double, 2>* grad_norm_out = nullptr;
  // Max stochastic-gradient norm drawn this step, per team.
  std::array<double, 2>* stoch_norm_out = nullptr;
};

// Adapt-then-combine with asymmetric estimate fusion:
//   phi_k   = own_k - mu * stoch_grad_k(own_k, est_k)
//   own_k'  = sum_l combine[t][k] phi_l
//   est_k'  = sum_l cross[t][k] value_l, value_l = est_l (same team) or own_l
// All reads use `prev`; noise streams are keyed by (master_seed, run, agent,
// next.iter). Throws DivergenceError when an iterate turns non-finite.
void diffusion_step(const NetworkState& prev, NetworkState& next, const CompiledTopology& topo,
                    const games::GameOracle& game, double mu, std::uint64_t master_seed,
                    int run, const StepOptions& opts = {});

// Same update with an explicit agent processing order (testing hook).
void diffusion_step_ordered(const NetworkState& prev, NetworkState& next,
                            const CompiledTopology& topo, const games::GameOracle& game,
                            double mu, std::uint64_t master_seed, int run,
                            std::span<const int> order);

// Single-model recursion both teams update simultaneously:
//   w_t' = w_t - (mu / K_t) * sum_{k in team t} stoch_grad_k(w1, w2).
// Noise draws replay the diffusion streams of the same (master_seed, run,
// iter), coupling the baseline to the network run it shadows.
void centralized_step(std::vector<double>& w1, std::vector<double>& w2,
                      const games::GameOracle& game, double mu, std::uint64_t master_seed,
                      int run, std::int64_t iter);

struct GanMetrics {
  double loss_disc = 0.0, loss_gen = 0.0;
  double d_real = 0.0, d_fake = 0.0;
  std::vector<double> gen_mean;
};

struct MetricsRecord {
  int run = 0;
  std::int64_t iter = 0;
  std::vector<double> centroid1, centroid2;
  std::array<double, 2> within{};     // max_k ||own_k - centroid||^2 per team
  std::array<double, 2> cross_err{};  // max_k ||est_k - opposing centroid||^2
  std::optional<double> nash_error;   // squared distance of centroids to reference
  std::optional<std::array<double, 2>> perturbation;
  std::optional<std::array<double, 2>> centralized_gap;  // centroid vs co-run
  std::optional<GanMetrics> gan;
};

std::vector<double> team_centroid(const NetworkState& state, int team);

struct RunConfig {
  double mu = 0.0;
  std::int64_t horizon = 0;  // 0 records the initial state only
  int mc_runs = 1;
  std::uint64_t master_seed = 1;
  InitSpec init;
  bool baseline = false;  // centralized co-run + perturbation residuals
  bool track_grad_norm = false;
  std::int64_t record_every = 1;
  // Squared-distance reference for nash_error (concatenated w1*, w2*).
  std::optional<std::pair<std::vector<double>, std::vector<double>>> reference;
  // Appends game-specific metrics to recorded rows (must be thread-safe).
  std::function<void(int run, const NetworkState&, MetricsRecord&)> extra_metrics;
};

// Monte-Carlo means over runs, one entry per iteration 0..horizon.
struct MeanSeries {
  std::array<std::vector<double>, 2> within, cross_err, perturbation, centralized_gap;
  std::vector<double> nash_error;
};

struct RunResult {
  std::vector<MetricsRecord> records;  // runs ascending, iterations thinned
  MeanSeries mean;
  std::array<double, 2> max_grad_norm{};   // over runs/iters/agents, per team
  std::array<double, 2> max_stoch_norm{};
};

// Executes mc_runs independent runs (seeded by run index) and aggregates in
// fixed run order; results are identical for any thread count. Runs execute
// in parallel when mc_runs > 1, otherwise agents within a step do.
RunResult run(const CompiledTopology& topo, const games::GameOracle& game,
              const RunConfig& config);

// Dense trajectory of one run, for post-hoc analysis and noise replay.
struct RecordedTrajectory {
  std::vector<NetworkState> states;  // iterations 0..horizon
  std::uint64_t master_seed = 0;
  int run = 0;
  double mu = 0.0;
};

RecordedTrajectory record_trajectory(const CompiledTopology& topo,
                                     const games::GameOracle& game, const RunConfig& config,
                                     int run);

}  // namespace compdiff::engine

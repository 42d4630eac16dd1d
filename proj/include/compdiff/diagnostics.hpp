#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "compdiff/engine.hpp"

namespace compdiff::diagnostics {

// Per-team averages of the own-model blocks (ascending agent order).
std::pair<std::vector<double>, std::vector<double>> centroids(const engine::NetworkState& state);

// Steady-state disagreement envelope for a team running the diffusion update:
//   mu^2 * (2 lambda2^2 / (1 - lambda2)) * K * (G^2 / (1 - lambda2) + sigma2).
// Requires lambda2 in [0, 1); throws std::invalid_argument otherwise.
double disagreement_bound(double lambda2, int team_size, double grad_bound, double noise_var,
                          double mu);

struct PlateauResult {
  double plateau = 0.0;
  std::optional<std::int64_t> burn_in;  // empty = never settles within the series
};

// plateau = mean of the final `window` points. burn_in = smallest index i with
// |mean(series[i..i+window)) - plateau| <= rel_tol * |plateau|; flagged not
// reached when that only happens inside the last 2*window points (the tail
// that defines the plateau itself). Requires series.size() >= 2 * window.
PlateauResult plateau_and_burn_in(std::span<const double> series, std::int64_t window,
                                  double rel_tol);

// Residual between each agent's realized update and the team-averaged
// stochastic direction evaluated at that agent's own iterates with replayed
// noise. Returns per-iteration max_k ||d_k||^2 for both teams, iterations
// 1..horizon (index 0 corresponds to the step into iteration 1).
// Throws std::invalid_argument if the trajectory has fewer than 2 states.
std::array<std::vector<double>, 2> perturbation_series(
    const engine::RecordedTrajectory& traj, const engine::CompiledTopology& topo,
    const games::GameOracle& game);

struct TeamBoundCheck {
  double lambda2 = 0.0;
  double rho_sub = 0.0;       // contraction factor of the estimate fusion into this team
  double bound = 0.0;         // disagreement_bound with trajectory constants
  double plateau_within = 0.0;
  double plateau_cross = 0.0;
  double plateau_perturbation = 0.0;
  double grad_bound_used = 0.0;
  std::optional<std::int64_t> burn_in;
  bool holds_post_burn_in = false;  // mean within-disagreement <= bound * margin
};

struct BoundReport {
  std::array<TeamBoundCheck, 2> team;
  double margin = 1.0;  // multiplicative slack applied to the bound
};

// Checks the disagreement envelope against the Monte-Carlo mean series, team
// by team, for every iteration at or past the detected burn-in.
BoundReport check_disagreement_bound(const engine::RunResult& result,
                                     const graph::NetworkTopology& topo, double mu,
                                     double noise_var, std::int64_t window, double rel_tol,
                                     double margin);

struct ScalingRow {
  double mu = 0.0;
  std::array<double, 2> plateau_within{}, plateau_cross{}, plateau_perturbation{};
  std::array<std::optional<std::int64_t>, 2> burn_in{};
  double nash_error_final = 0.0;
};

struct ScalingRatios {
  double mu_hi = 0.0, mu_lo = 0.0;  // mu_hi = 2 * mu_lo
  std::array<double, 2> within{}, cross_err{}, perturbation{};
};

struct ScalingTable {
  std::vector<ScalingRow> rows;      // mu descending
  std::vector<ScalingRatios> ratios; // adjacent pairs
};

// Plateau ratios across a halving step-size ladder, one engine sweep per mu.
// Throws std::invalid_argument unless mus (after descending sort) has >= 2
// entries, each adjacent pair within 1% of a factor 2.
ScalingTable mu_scaling_study(const engine::CompiledTopology& topo,
                              const games::GameOracle& game, const engine::RunConfig& base,
                              std::span<const double> mus, std::int64_t window,
                              double rel_tol);

}  // namespace compdiff::diagnostics

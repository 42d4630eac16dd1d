#include "compdiff/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "compdiff/linalg.hpp"

namespace compdiff::diagnostics {

std::pair<std::vector<double>, std::vector<double>> centroids(
    const engine::NetworkState& state) {
  return {engine::team_centroid(state, 1), engine::team_centroid(state, 2)};
}

double disagreement_bound(double lambda2, int team_size, double grad_bound,
                          double noise_var, double mu) {
  if (!(lambda2 >= 0.0 && lambda2 < 1.0))
    throw std::invalid_argument("lambda2 must lie in [0, 1)");
  if (team_size < 1) throw std::invalid_argument("team size must be >= 1");
  const double contraction = 2.0 * lambda2 * lambda2 / (1.0 - lambda2);
  const double drift = grad_bound * grad_bound / (1.0 - lambda2) + noise_var;
  return mu * mu * contraction * team_size * drift;
}

PlateauResult plateau_and_burn_in(std::span<const double> series, std::int64_t window,
                                  double rel_tol) {
  const std::int64_t n = static_cast<std::int64_t>(series.size());
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (n < 2 * window) throw std::invalid_argument("series shorter than two windows");
  if (rel_tol < 0.0) throw std::invalid_argument("rel_tol must be >= 0");

  std::vector<double> prefix(n + 1, 0.0);
  for (std::int64_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];
  const auto window_mean = [&](std::int64_t i) {
    return (prefix[i + window] - prefix[i]) / window;
  };

  PlateauResult res;
  res.plateau = window_mean(n - window);
  const double tol = rel_tol * std::abs(res.plateau);
  for (std::int64_t i = 0; i + window <= n; ++i) {
    if (std::abs(window_mean(i) - res.plateau) <= tol) {
      // A match first appearing inside the closing stretch that defines the
      // plateau itself does not count as settling.
      if (i <= n - 2 * window) res.burn_in = i;
      break;
    }
  }
  return res;
}

std::array<std::vector<double>, 2> perturbation_series(
    const engine::RecordedTrajectory& traj, const engine::CompiledTopology& topo,
    const games::GameOracle& game) {
  if (traj.states.size() < 2)
    throw std::invalid_argument("trajectory needs at least two states");
  if (traj.mu == 0.0) throw std::invalid_argument("trajectory has zero step size");
  const int k1 = topo.k1, k2 = topo.k2;
  const std::int64_t steps = static_cast<std::int64_t>(traj.states.size()) - 1;
  std::array<std::vector<double>, 2> out;
  out[0].assign(steps, 0.0);
  out[1].assign(steps, 0.0);
  std::vector<double> g, sum;
  for (std::int64_t i = 1; i <= steps; ++i) {
    const engine::NetworkState& prev = traj.states[i - 1];
    const engine::NetworkState& next = traj.states[i];
    for (int team = 1; team <= 2; ++team) {
      const int kt = team == 1 ? k1 : k2;
      const int base = team == 1 ? 0 : k1;
      const int m = prev.own_dim(team);
      g.resize(m);
      sum.resize(m);
      for (int k = 0; k < kt; ++k) {
        const auto own = prev.own(team, k);
        const auto est = prev.est(team, k);
        std::fill(sum.begin(), sum.end(), 0.0);
        for (int mate = 0; mate < kt; ++mate) {
          rng::Stream stream(rng::stream_seed(traj.master_seed, traj.run, base + mate, i,
                                              rng::Purpose::kGradNoise));
          game.stoch_grad(team, base + mate, own, est, stream, g);
          for (int j = 0; j < m; ++j) sum[j] += g[j];
        }
        const auto own_next = next.own(team, k);
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          const double d = (own_next[j] - own[j]) / traj.mu + sum[j] / kt;
          acc += d * d;
        }
        out[team - 1][i - 1] = std::max(out[team - 1][i - 1], acc);
      }
    }
  }
  return out;
}

BoundReport check_disagreement_bound(const engine::RunResult& result,
                                     const graph::NetworkTopology& topo, double mu,
                                     double noise_var, std::int64_t window, double rel_tol,
                                     double margin) {
  BoundReport report;
  report.margin = margin;
  for (int t = 0; t < 2; ++t) {
    TeamBoundCheck& check = report.team[t];
    check.lambda2 = t == 0 ? topo.a1.lambda2 : topo.a2.lambda2;
    check.rho_sub = t == 0 ? topo.to_team1.rho_sub : topo.to_team2.rho_sub;
    check.grad_bound_used = result.max_grad_norm[t];
    const int team_size = t == 0 ? topo.team1.size : topo.team2.size;
    check.bound =
        disagreement_bound(check.lambda2, team_size, check.grad_bound_used, noise_var, mu);

    const auto& within = result.mean.within[t];
    const PlateauResult within_fit = plateau_and_burn_in(within, window, rel_tol);
    check.plateau_within = within_fit.plateau;
    check.burn_in = within_fit.burn_in;
    check.plateau_cross =
        plateau_and_burn_in(result.mean.cross_err[t], window, rel_tol).plateau;
    if (!result.mean.perturbation[t].empty())
      check.plateau_perturbation =
          plateau_and_burn_in(result.mean.perturbation[t], window, rel_tol).plateau;

    check.holds_post_burn_in = check.burn_in.has_value();
    if (check.burn_in) {
      const double cap = check.bound * margin;
      for (std::size_t i = *check.burn_in; i < within.size(); ++i)
        if (within[i] > cap) {
          check.holds_post_burn_in = false;
          break;
        }
    }
  }
  return report;
}

ScalingTable mu_scaling_study(const engine::CompiledTopology& topo,
                              const games::GameOracle& game, const engine::RunConfig& base,
                              std::span<const double> mus, std::int64_t window,
                              double rel_tol) {
  std::vector<double> ladder(mus.begin(), mus.end());
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  if (ladder.size() < 2)
    throw std::invalid_argument("need at least two step sizes to form ratios");
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    if (!(ladder[i + 1] > 0.0)) throw std::invalid_argument("step sizes must be > 0");
    const double factor = ladder[i] / ladder[i + 1];
    if (std::abs(factor - 2.0) > 0.02)
      throw std::invalid_argument("step sizes must halve down the ladder");
  }

  ScalingTable table;
  for (double mu : ladder) {
    engine::RunConfig cfg = base;
    cfg.mu = mu;
    cfg.baseline = true;  // the residual series is the point of the sweep
    const engine::RunResult result = engine::run(topo, game, cfg);
    ScalingRow row;
    row.mu = mu;
    for (int t = 0; t < 2; ++t) {
      const PlateauResult within_fit =
          plateau_and_burn_in(result.mean.within[t], window, rel_tol);
      row.plateau_within[t] = within_fit.plateau;
      row.burn_in[t] = within_fit.burn_in;
      row.plateau_cross[t] =
          plateau_and_burn_in(result.mean.cross_err[t], window, rel_tol).plateau;
      row.plateau_perturbation[t] =
          plateau_and_burn_in(result.mean.perturbation[t], window, rel_tol).plateau;
    }
    if (!result.mean.nash_error.empty())
      row.nash_error_final = result.mean.nash_error.back();
    table.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    const ScalingRow& hi = table.rows[i];
    const ScalingRow& lo = table.rows[i + 1];
    ScalingRatios r;
    r.mu_hi = hi.mu;
    r.mu_lo = lo.mu;
    for (int t = 0; t < 2; ++t) {
      r.within[t] = hi.plateau_within[t] / lo.plateau_within[t];
      r.cross_err[t] = hi.plateau_cross[t] / lo.plateau_cross[t];
      r.perturbation[t] = hi.plateau_perturbation[t] / lo.plateau_perturbation[t];
    }
    table.ratios.push_back(r);
  }
  return table;
}

}  // namespace compdiff::diagnostics

#include "compdiff/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "compdiff/errors.hpp"
#include "compdiff/linalg.hpp"

namespace compdiff::engine {

CompiledTopology compile_topology(const graph::NetworkTopology& topo) {
  CompiledTopology c;
  c.k1 = topo.team1.size;
  c.k2 = topo.team2.size;
  for (int t = 0; t < 2; ++t) {
    const graph::CombinationMatrix& a = t == 0 ? topo.a1 : topo.a2;
    const graph::CrossMatrix& x = t == 0 ? topo.to_team1 : topo.to_team2;
    c.combine[t].resize(a.size);
    c.cross[t].resize(a.size);
    for (int k = 0; k < a.size; ++k) {
      for (int l = 0; l < a.size; ++l)
        if (a.weight(l, k) != 0.0) c.combine[t][k].push_back({l, a.weight(l, k)});
      for (int g = 0; g < x.total_agents; ++g)
        if (x.weight(g, k) != 0.0) c.cross[t][k].push_back({g, x.weight(g, k)});
    }
  }
  return c;
}

std::span<double> NetworkState::own(int team, int local) {
  if (team == 1) return std::span<double>(own1).subspan(static_cast<std::size_t>(local) * m1, m1);
  return std::span<double>(own2).subspan(static_cast<std::size_t>(local) * m2, m2);
}
std::span<const double> NetworkState::own(int team, int local) const {
  if (team == 1)
    return std::span<const double>(own1).subspan(static_cast<std::size_t>(local) * m1, m1);
  return std::span<const double>(own2).subspan(static_cast<std::size_t>(local) * m2, m2);
}
std::span<double> NetworkState::est(int team, int local) {
  if (team == 1) return std::span<double>(est1).subspan(static_cast<std::size_t>(local) * m2, m2);
  return std::span<double>(est2).subspan(static_cast<std::size_t>(local) * m1, m1);
}
std::span<const double> NetworkState::est(int team, int local) const {
  if (team == 1)
    return std::span<const double>(est1).subspan(static_cast<std::size_t>(local) * m2, m2);
  return std::span<const double>(est2).subspan(static_cast<std::size_t>(local) * m1, m1);
}

NetworkState make_initial_state(const CompiledTopology& topo, const games::GameOracle& game,
                                const InitSpec& init, std::uint64_t master_seed, int run) {
  NetworkState s;
  s.iter = 0;
  s.k1 = topo.k1;
  s.k2 = topo.k2;
  s.m1 = game.dim(1);
  s.m2 = game.dim(2);
  s.own1.assign(static_cast<std::size_t>(s.k1) * s.m1, 0.0);
  s.est1.assign(static_cast<std::size_t>(s.k1) * s.m2, 0.0);
  s.own2.assign(static_cast<std::size_t>(s.k2) * s.m2, 0.0);
  s.est2.assign(static_cast<std::size_t>(s.k2) * s.m1, 0.0);
  if (init.kind == InitSpec::Kind::kGaussian) {
    for (int team = 1; team <= 2; ++team) {
      const int n = team == 1 ? s.k1 : s.k2;
      for (int k = 0; k < n; ++k) {
        const int global = team == 1 ? k : s.k1 + k;
        rng::Stream stream(
            rng::stream_seed(master_seed, run, global, 0, rng::Purpose::kInit));
        for (double& v : s.own(team, k)) v = init.scale * stream.next_gaussian();
        for (double& v : s.est(team, k)) v = init.scale * stream.next_gaussian();
      }
    }
  }
  return s;
}

namespace {

void prepare_next(const NetworkState& prev, NetworkState& next) {
  next.iter = prev.iter + 1;
  next.k1 = prev.k1;
  next.k2 = prev.k2;
  next.m1 = prev.m1;
  next.m2 = prev.m2;
  next.own1.resize(prev.own1.size());
  next.est1.resize(prev.est1.size());
  next.own2.resize(prev.own2.size());
  next.est2.resize(prev.est2.size());
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Shared body of diffusion_step / diffusion_step_ordered. `order`, when
// non-empty, fixes the agent processing order (global ids, a permutation).
void step_impl(const NetworkState& prev, NetworkState& next, const CompiledTopology& topo,
               const games::GameOracle& game, double mu, std::uint64_t master_seed, int run,
               const StepOptions& opts, std::span<const int> order) {
  prepare_next(prev, next);
  const int k1 = topo.k1, k2 = topo.k2;
  const int total = k1 + k2;
  const int m1 = prev.m1, m2 = prev.m2;
  const std::int64_t iter = next.iter;
  const bool par = opts.mode == StepMode::kParallelAgents && order.empty();

  std::vector<double> phi1(prev.own1.size()), phi2(prev.own2.size());
  std::vector<double> stoch_sq(opts.stoch_norm_out ? total : 0, 0.0);
  std::vector<double> grad_sq(opts.grad_norm_out ? total : 0, 0.0);

  auto agent_at = [&](int idx) { return order.empty() ? idx : order[idx]; };

  // Pass 1: per-agent descent direction phi_a = own_a - mu * g_a.
#pragma omp parallel if (par)
  {
    std::vector<double> g(std::max(m1, m2));
#pragma omp for schedule(static)
    for (int idx = 0; idx < total; ++idx) {
      const int a = agent_at(idx);
      const int team = a < k1 ? 1 : 2;
      const int local = a < k1 ? a : a - k1;
      const int m = team == 1 ? m1 : m2;
      std::span<double> gs(g.data(), m);
      rng::Stream stream(
          rng::stream_seed(master_seed, run, a, iter, rng::Purpose::kGradNoise));
      const auto own = prev.own(team, local);
      const auto est = prev.est(team, local);
      game.stoch_grad(team, a, own, est, stream, gs);
      double* phi = (team == 1 ? phi1.data() : phi2.data()) +
                    static_cast<std::size_t>(local) * m;
      for (int i = 0; i < m; ++i) phi[i] = own[i] - mu * gs[i];
      if (opts.stoch_norm_out) stoch_sq[a] = la::sqnorm(gs);
      if (opts.grad_norm_out) {
        game.local_grad(team, a, own, est, gs);
        grad_sq[a] = la::sqnorm(gs);
      }
    }

    // Pass 2: within-team combination of phi, cross fusion of the estimates.
#pragma omp for schedule(static)
    for (int idx = 0; idx < total; ++idx) {
      const int a = agent_at(idx);
      const int team = a < k1 ? 1 : 2;
      const int local = a < k1 ? a : a - k1;
      const int m = team == 1 ? m1 : m2;
      const int me = team == 1 ? m2 : m1;
      const std::vector<double>& phi = team == 1 ? phi1 : phi2;
      auto own_next = next.own(team, local);
      std::fill(own_next.begin(), own_next.end(), 0.0);
      for (const auto& [src, w] : topo.combine[team - 1][local]) {
        const double* p = phi.data() + static_cast<std::size_t>(src) * m;
        for (int i = 0; i < m; ++i) own_next[i] += w * p[i];
      }
      auto est_next = next.est(team, local);
      std::fill(est_next.begin(), est_next.end(), 0.0);
      for (const auto& [src, w] : topo.cross[team - 1][local]) {
        const int steam = src < k1 ? 1 : 2;
        const int slocal = src < k1 ? src : src - k1;
        // Same-team sources contribute their estimate, opposing-team sources
        // their own model; both read the pre-step snapshot.
        const auto value = steam == team ? prev.est(steam, slocal) : prev.own(steam, slocal);
        for (int i = 0; i < me; ++i) est_next[i] += w * value[i];
      }
    }
  }

  if (opts.stoch_norm_out) {
    (*opts.stoch_norm_out) = {0.0, 0.0};
    for (int a = 0; a < total; ++a) {
      const int t = a < k1 ? 0 : 1;
      (*opts.stoch_norm_out)[t] = std::max((*opts.stoch_norm_out)[t], stoch_sq[a]);
    }
    for (double& v : *opts.stoch_norm_out) v = std::sqrt(v);
  }
  if (opts.grad_norm_out) {
    (*opts.grad_norm_out) = {0.0, 0.0};
    for (int a = 0; a < total; ++a) {
      const int t = a < k1 ? 0 : 1;
      (*opts.grad_norm_out)[t] = std::max((*opts.grad_norm_out)[t], grad_sq[a]);
    }
    for (double& v : *opts.grad_norm_out) v = std::sqrt(v);
  }

  // Pass 3 (optional): residual against the team-averaged direction with each
  // teammate's noise replayed at this agent's pre-step iterates.
  if (opts.perturbation_out) {
    (*opts.perturbation_out) = {0.0, 0.0};
    if (mu != 0.0) {
      std::vector<double> d_sq(total, 0.0);
#pragma omp parallel if (par)
      {
        std::vector<double> g(std::max(m1, m2));
        std::vector<double> sum(std::max(m1, m2));
#pragma omp for schedule(static)
        for (int a = 0; a < total; ++a) {
          const int team = a < k1 ? 1 : 2;
          const int local = a < k1 ? a : a - k1;
          const int m = team == 1 ? m1 : m2;
          const int kt = team == 1 ? k1 : k2;
          const int base = team == 1 ? 0 : k1;
          std::span<double> gs(g.data(), m);
          const auto own = prev.own(team, local);
          const auto est = prev.est(team, local);
          std::fill_n(sum.data(), m, 0.0);
          for (int mate = 0; mate < kt; ++mate) {
            rng::Stream stream(rng::stream_seed(master_seed, run, base + mate, iter,
                                                rng::Purpose::kGradNoise));
            game.stoch_grad(team, base + mate, own, est, stream, gs);
            for (int i = 0; i < m; ++i) sum[i] += gs[i];
          }
          const auto own_next = next.own(team, local);
          double acc = 0.0;
          for (int i = 0; i < m; ++i) {
            const double d = (own_next[i] - own[i]) / mu + sum[i] / kt;
            acc += d * d;
          }
          d_sq[a] = acc;
        }
      }
      for (int a = 0; a < total; ++a) {
        const int t = a < k1 ? 0 : 1;
        (*opts.perturbation_out)[t] = std::max((*opts.perturbation_out)[t], d_sq[a]);
      }
    }
  }

  if (!all_finite(next.own1) || !all_finite(next.est1) || !all_finite(next.own2) ||
      !all_finite(next.est2))
    throw DivergenceError(run, iter,
                          "iterate turned non-finite at iteration " + std::to_string(iter));
}

}  // namespace

void diffusion_step(const NetworkState& prev, NetworkState& next, const CompiledTopology& topo,
                    const games::GameOracle& game, double mu, std::uint64_t master_seed,
                    int run, const StepOptions& opts) {
  step_impl(prev, next, topo, game, mu, master_seed, run, opts, {});
}

void diffusion_step_ordered(const NetworkState& prev, NetworkState& next,
                            const CompiledTopology& topo, const games::GameOracle& game,
                            double mu, std::uint64_t master_seed, int run,
                            std::span<const int> order) {
  if (static_cast<int>(order.size()) != topo.total_agents())
    throw std::invalid_argument("order must list every agent once");
  std::vector<std::uint8_t> seen(order.size(), 0);
  for (const int a : order) {
    if (a < 0 || a >= topo.total_agents() || seen[static_cast<std::size_t>(a)])
      throw std::invalid_argument("order must list every agent once");
    seen[static_cast<std::size_t>(a)] = 1;
  }
  step_impl(prev, next, topo, game, mu, master_seed, run, {}, order);
}

void centralized_step(std::vector<double>& w1, std::vector<double>& w2,
                      const games::GameOracle& game, double mu, std::uint64_t master_seed,
                      int run, std::int64_t iter) {
  const int k1 = game.team_size(1), k2 = game.team_size(2);
  const int m1 = game.dim(1), m2 = game.dim(2);
  std::vector<double> g(std::max(m1, m2)), sum1(m1, 0.0), sum2(m2, 0.0);
  for (int k = 0; k < k1; ++k) {
    rng::Stream stream(rng::stream_seed(master_seed, run, k, iter, rng::Purpose::kGradNoise));
    std::span<double> gs(g.data(), m1);
    game.stoch_grad(1, k, w1, w2, stream, gs);
    for (int i = 0; i < m1; ++i) sum1[i] += gs[i];
  }
  for (int k = 0; k < k2; ++k) {
    rng::Stream stream(
        rng::stream_seed(master_seed, run, k1 + k, iter, rng::Purpose::kGradNoise));
    std::span<double> gs(g.data(), m2);
    game.stoch_grad(2, k1 + k, w2, w1, stream, gs);
    for (int i = 0; i < m2; ++i) sum2[i] += gs[i];
  }
  for (int i = 0; i < m1; ++i) w1[i] -= mu / k1 * sum1[i];
  for (int i = 0; i < m2; ++i) w2[i] -= mu / k2 * sum2[i];
}

std::vector<double> team_centroid(const NetworkState& state, int team) {
  const int n = team == 1 ? state.k1 : state.k2;
  const int m = state.own_dim(team);
  std::vector<double> c(m, 0.0);
  for (int k = 0; k < n; ++k) {
    const auto own = state.own(team, k);
    for (int i = 0; i < m; ++i) c[i] += own[i];
  }
  for (double& v : c) v /= n;
  return c;
}

namespace {

struct PerRunSeries {
  std::vector<MetricsRecord> records;
  std::array<std::vector<double>, 2> within, cross_err, perturbation, centralized_gap;
  std::vector<double> nash_error;
  std::array<double, 2> max_grad{}, max_stoch{};
};

double max_dev_sq(const NetworkState& s, int team, std::span<const double> center,
                  bool estimates) {
  const int n = team == 1 ? s.k1 : s.k2;
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto v = estimates ? s.est(team, k) : s.own(team, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double d = v[i] - center[i];
      acc += d * d;
    }
    worst = std::max(worst, acc);
  }
  return worst;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

PerRunSeries simulate_run(const CompiledTopology& topo, const games::GameOracle& game,
                          const RunConfig& cfg, int run, StepMode mode) {
  const std::int64_t horizon = cfg.horizon;
  const std::int64_t n = horizon + 1;
  PerRunSeries out;
  for (int t = 0; t < 2; ++t) {
    out.within[t].assign(n, 0.0);
    out.cross_err[t].assign(n, 0.0);
    if (cfg.baseline) {
      out.perturbation[t].assign(n, 0.0);
      out.centralized_gap[t].assign(n, 0.0);
    }
  }
  if (cfg.reference) out.nash_error.assign(n, 0.0);

  NetworkState state = make_initial_state(topo, game, cfg.init, cfg.master_seed, run);
  NetworkState next;
  std::vector<double> w1c, w2c;
  if (cfg.baseline) {
    w1c = team_centroid(state, 1);
    w2c = team_centroid(state, 2);
  }

  StepOptions opts;
  opts.mode = mode;
  std::array<double, 2> pert{}, gnorm{}, snorm{};
  if (cfg.baseline) opts.perturbation_out = &pert;
  if (cfg.track_grad_norm) {
    opts.grad_norm_out = &gnorm;
    opts.stoch_norm_out = &snorm;
  }

  const auto measure = [&](const NetworkState& s, std::int64_t i) {
    const auto c1 = team_centroid(s, 1);
    const auto c2 = team_centroid(s, 2);
    out.within[0][i] = max_dev_sq(s, 1, c1, false);
    out.within[1][i] = max_dev_sq(s, 2, c2, false);
    out.cross_err[0][i] = max_dev_sq(s, 1, c2, true);
    out.cross_err[1][i] = max_dev_sq(s, 2, c1, true);
    if (cfg.reference)
      out.nash_error[i] =
          sq_dist(c1, cfg.reference->first) + sq_dist(c2, cfg.reference->second);
    if (cfg.baseline) {
      out.centralized_gap[0][i] = sq_dist(c1, w1c);
      out.centralized_gap[1][i] = sq_dist(c2, w2c);
    }
    if (i == 0 || i % cfg.record_every == 0 || i == horizon) {
      MetricsRecord rec;
      rec.run = run;
      rec.iter = i;
      rec.centroid1 = c1;
      rec.centroid2 = c2;
      rec.within = {out.within[0][i], out.within[1][i]};
      rec.cross_err = {out.cross_err[0][i], out.cross_err[1][i]};
      if (cfg.reference) rec.nash_error = out.nash_error[i];
      if (cfg.baseline && i > 0) {
        rec.perturbation = {out.perturbation[0][i], out.perturbation[1][i]};
        rec.centralized_gap = {out.centralized_gap[0][i], out.centralized_gap[1][i]};
      }
      if (cfg.extra_metrics) cfg.extra_metrics(run, s, rec);
      out.records.push_back(std::move(rec));
    }
  };

  for (std::int64_t i = 1; i <= horizon; ++i) {
    diffusion_step(state, next, topo, game, cfg.mu, cfg.master_seed, run, opts);
    if (cfg.baseline) {
      centralized_step(w1c, w2c, game, cfg.mu, cfg.master_seed, run, i);
      out.perturbation[0][i] = pert[0];
      out.perturbation[1][i] = pert[1];
    }
    if (cfg.track_grad_norm)
      for (int t = 0; t < 2; ++t) {
        out.max_grad[t] = std::max(out.max_grad[t], gnorm[t]);
        out.max_stoch[t] = std::max(out.max_stoch[t], snorm[t]);
      }
    std::swap(state, next);
    if (i == 1) measure(next, 0);  // the pre-step snapshot, now in `next`
    measure(state, i);
  }
  if (horizon == 0) measure(state, 0);

  // Records accumulated out of iteration order when horizon >= 1 (iteration 0
  // is measured after the first step); restore ascending order.
  std::sort(out.records.begin(), out.records.end(),
            [](const MetricsRecord& a, const MetricsRecord& b) { return a.iter < b.iter; });
  return out;
}

}  // namespace

RunResult run(const CompiledTopology& topo, const games::GameOracle& game,
              const RunConfig& config) {
  if (config.horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  if (config.mc_runs < 1) throw std::invalid_argument("mc_runs must be >= 1");
  if (config.record_every < 1) throw std::invalid_argument("record_every must be >= 1");

  const std::int64_t n = config.horizon + 1;
  RunResult result;
  for (int t = 0; t < 2; ++t) {
    result.mean.within[t].assign(n, 0.0);
    result.mean.cross_err[t].assign(n, 0.0);
    if (config.baseline) {
      result.mean.perturbation[t].assign(n, 0.0);
      result.mean.centralized_gap[t].assign(n, 0.0);
    }
  }
  if (config.reference) result.mean.nash_error.assign(n, 0.0);

  const StepMode inner =
      config.mc_runs == 1 ? StepMode::kParallelAgents : StepMode::kSerial;

  // Fixed-size batches keep peak memory flat; accumulation happens outside
  // the parallel region in ascending run order, so sums do not depend on the
  // thread count.
  constexpr int kBatch = 16;
  std::vector<PerRunSeries> slot(std::min(config.mc_runs, kBatch));
  std::exception_ptr first_error;
  int first_error_run = config.mc_runs;

  for (int start = 0; start < config.mc_runs && !first_error; start += kBatch) {
    const int end = std::min(config.mc_runs, start + kBatch);
#pragma omp parallel for schedule(dynamic, 1) if (config.mc_runs > 1)
    for (int r = start; r < end; ++r) {
      try {
        slot[r - start] = simulate_run(topo, game, config, r, inner);
      } catch (...) {
#pragma omp critical
        if (r < first_error_run) {
          first_error_run = r;
          first_error = std::current_exception();
        }
      }
    }
    if (first_error) break;
    for (int r = start; r < end; ++r) {
      PerRunSeries& s = slot[r - start];
      for (int t = 0; t < 2; ++t) {
        for (std::int64_t i = 0; i < n; ++i) {
          result.mean.within[t][i] += s.within[t][i];
          result.mean.cross_err[t][i] += s.cross_err[t][i];
        }
        if (config.baseline)
          for (std::int64_t i = 0; i < n; ++i) {
            result.mean.perturbation[t][i] += s.perturbation[t][i];
            result.mean.centralized_gap[t][i] += s.centralized_gap[t][i];
          }
        result.max_grad_norm[t] = std::max(result.max_grad_norm[t], s.max_grad[t]);
        result.max_stoch_norm[t] = std::max(result.max_stoch_norm[t], s.max_stoch[t]);
      }
      if (config.reference)
        for (std::int64_t i = 0; i < n; ++i) result.mean.nash_error[i] += s.nash_error[i];
      result.records.insert(result.records.end(),
                            std::make_move_iterator(s.records.begin()),
                            std::make_move_iterator(s.records.end()));
      s = PerRunSeries{};
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  const double inv = 1.0 / config.mc_runs;
  for (int t = 0; t < 2; ++t) {
    for (double& v : result.mean.within[t]) v *= inv;
    for (double& v : result.mean.cross_err[t]) v *= inv;
    for (double& v : result.mean.perturbation[t]) v *= inv;
    for (double& v : result.mean.centralized_gap[t]) v *= inv;
  }
  for (double& v : result.mean.nash_error) v *= inv;
  return result;
}

RecordedTrajectory record_trajectory(const CompiledTopology& topo,
                                     const games::GameOracle& game, const RunConfig& config,
                                     int run) {
  RecordedTrajectory traj;
  traj.master_seed = config.master_seed;
  traj.run = run;
  traj.mu = config.mu;
  traj.states.reserve(config.horizon + 1);
  traj.states.push_back(make_initial_state(topo, game, config.init, config.master_seed, run));
  for (std::int64_t i = 1; i <= config.horizon; ++i) {
    NetworkState next;
    diffusion_step(traj.states.back(), next, topo, game, config.mu, config.master_seed, run);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

}  // namespace compdiff::engine

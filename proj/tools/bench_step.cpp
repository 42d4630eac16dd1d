#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "compdiff/engine.hpp"
#include "compdiff/games.hpp"
#include "compdiff/graph.hpp"

// Times the diffusion step with serial and parallel-agent execution and the
// Monte-Carlo driver with one and many threads, checking that every variant
// produces bit-identical results (the parallel kernels only reorder work, all
// writes are private and reads come from the previous snapshot).

using namespace compdiff;

namespace {

bool same_state(const engine::NetworkState& a, const engine::NetworkState& b) {
  return a.own1 == b.own1 && a.est1 == b.est1 && a.own2 == b.own2 && a.est2 == b.est2;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  const int k = 48, m = 16;
  graph::TeamGraph t1 = graph::build_team_graph(graph::GraphKind::kRandomConnected, k, 0.1, 7, 1);
  graph::TeamGraph t2 = graph::build_team_graph(graph::GraphKind::kRandomConnected, k, 0.1, 8, 2);
  const auto links = graph::sample_cross_links(k, k, 4, 11);
  const graph::NetworkTopology topo = graph::make_topology(t1, t2, links);
  const engine::CompiledTopology ct = engine::compile_topology(topo);

  games::QuadraticGame::Params p;
  p.k1 = k;
  p.k2 = k;
  p.p = la::Matrix::identity(m);
  p.q = la::Matrix::identity(m);
  p.c = la::Matrix::scaled_identity(m, 0.5);
  p.b.assign(m, 1.0);
  p.d.assign(m, -1.0);
  p.sigma = 0.1;
  p.shift_seed = 3;
  const games::QuadraticGame game(p);

  engine::InitSpec init{engine::InitSpec::Kind::kGaussian, 1.0};
  const engine::NetworkState start = engine::make_initial_state(ct, game, init, 1, 0);

  const int steps = 2000;
  engine::NetworkState serial = start, parallel = start, next;
  engine::StepOptions sopt, popt;
  sopt.mode = engine::StepMode::kSerial;
  popt.mode = engine::StepMode::kParallelAgents;

  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < steps; ++i) {
    engine::diffusion_step(serial, next, ct, game, 0.01, 1, 0, sopt);
    std::swap(serial, next);
  }
  const double t_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < steps; ++i) {
    engine::diffusion_step(parallel, next, ct, game, 0.01, 1, 0, popt);
    std::swap(parallel, next);
  }
  const double t_parallel = seconds_since(t0);

  std::printf("step kernel, %d agents x %d dims, %d steps\n", 2 * k, m, steps);
  std::printf("  serial:          %8.3f s  (%.2f us/step)\n", t_serial,
              1e6 * t_serial / steps);
  std::printf("  parallel agents: %8.3f s  (%.2f us/step, speedup %.2fx)\n", t_parallel,
              1e6 * t_parallel / steps, t_serial / t_parallel);
  std::printf("  states identical: %s\n", same_state(serial, parallel) ? "yes" : "NO");

  engine::RunConfig rc;
  rc.mu = 0.01;
  rc.horizon = 300;
  rc.mc_runs = 32;
  rc.master_seed = 1;
  rc.init = init;
  rc.baseline = true;

#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  t0 = std::chrono::steady_clock::now();
  const engine::RunResult r1 = engine::run(ct, game, rc);
  const double t_one = seconds_since(t0);

#ifdef _OPENMP
  omp_set_num_threads(omp_get_num_procs());
#endif
  t0 = std::chrono::steady_clock::now();
  const engine::RunResult rn = engine::run(ct, game, rc);
  const double t_many = seconds_since(t0);

  const bool same_means = r1.mean.within[0] == rn.mean.within[0] &&
                          r1.mean.within[1] == rn.mean.within[1] &&
                          r1.mean.cross_err[0] == rn.mean.cross_err[0] &&
                          r1.mean.cross_err[1] == rn.mean.cross_err[1] &&
                          r1.mean.perturbation[0] == rn.mean.perturbation[0] &&
                          r1.mean.perturbation[1] == rn.mean.perturbation[1];
  std::printf("monte-carlo driver, %d runs x %lld iters\n", rc.mc_runs,
              static_cast<long long>(rc.horizon));
  std::printf("  1 thread:  %8.3f s\n", t_one);
  std::printf("  all cores: %8.3f s  (speedup %.2fx)\n", t_many, t_one / t_many);
  std::printf("  mean series identical: %s\n", same_means ? "yes" : "NO");
  return same_state(serial, parallel) && same_means ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "compdiff/linalg.hpp"
#include "compdiff/rng.hpp"

namespace compdiff::games {

struct ReportedConstant {
  double value = 0.0;
  bool verified = false;  // false = estimate or unknown, value may be NaN
};

struct GameConstants {
  ReportedConstant lipschitz;    // gradient Lipschitz modulus (per argument)
  ReportedConstant grad_bound;   // uniform gradient-norm bound, if any
  ReportedConstant noise_var;    // E||stochastic gradient - gradient||^2
};

// Two-team cost oracle. Team 1 agents occupy global ids [0, K1), team 2
// [K1, K1+K2). `own` is always the calling team's model, `other` the opposing
// one; team-t gradients are taken with respect to the team-t argument.
class GameOracle {
 public:
  virtual ~GameOracle() = default;

  virtual int dim(int team) const = 0;
  virtual int team_size(int team) const = 0;
  int total_agents() const { return team_size(1) + team_size(2); }
  int team_of(int agent) const { return agent < team_size(1) ? 1 : 2; }
  int local_index(int agent) const {
    return agent < team_size(1) ? agent : agent - team_size(1);
  }

  // Exact per-agent cost and gradient. `agent` is the global id; passing an
  // agent outside `team` throws std::invalid_argument.
  virtual double local_cost(int team, int agent, std::span<const double> own,
                            std::span<const double> other) const = 0;
  virtual void local_grad(int team, int agent, std::span<const double> own,
                          std::span<const double> other, std::span<double> out) const = 0;

  // One stochastic gradient draw; consumes `stream` deterministically so a
  // draw can be replayed by reseeding the same stream.
  virtual void stoch_grad(int team, int agent, std::span<const double> own,
                          std::span<const double> other, rng::Stream& stream,
                          std::span<double> out) const = 0;

  virtual GameConstants constants() const = 0;

 protected:
  void check_membership(int team, int agent) const;
};

struct NashPoint {
  std::vector<double> w1, w2;
  double residual1 = 0.0, residual2 = 0.0;  // norms of the stationarity residuals
};

// Quadratic two-team cost with per-agent linear shifts that sum to zero:
//   J(w1; w2) = 1/2 w1'P w1 + w1'C w2 - 1/2 w2'Q w2 + b'w1 + c'w2
//   team-1 agent k adds beta_k' w1, team-2 agent k adds gamma_k' w2 to -J.
// Stochastic gradients add isotropic Gaussian noise with total variance
// sigma^2 (per-coordinate variance sigma^2 / dim).
class QuadraticGame : public GameOracle {
 public:
  struct Params {
    int k1 = 0, k2 = 0;
    la::Matrix p, q, c;        // p: M1xM1 SPD, q: M2xM2 SPD, c: M1xM2
    std::vector<double> b, d;  // linear terms for team 1 / team 2 ("c" in the cost)
    double sigma = 0.0;        // noise standard deviation
    std::int64_t shift_seed = -1;  // < 0 disables per-agent shifts
    double shift_scale = 1.0;
  };

  explicit QuadraticGame(Params params);

  int dim(int team) const override { return team == 1 ? params_.p.rows : params_.q.rows; }
  int team_size(int team) const override { return team == 1 ? params_.k1 : params_.k2; }

  double local_cost(int team, int agent, std::span<const double> own,
                    std::span<const double> other) const override;
  void local_grad(int team, int agent, std::span<const double> own,
                  std::span<const double> other, std::span<double> out) const override;
  void stoch_grad(int team, int agent, std::span<const double> own,
                  std::span<const double> other, rng::Stream& stream,
                  std::span<double> out) const override;
  GameConstants constants() const override;

  const Params& params() const { return params_; }
  std::span<const double> shift(int team, int local) const;

 private:
  Params params_;
  std::vector<double> beta_;   // k1 x M1, row-major, rows sum to zero exactly
  std::vector<double> gamma_;  // k2 x M2
};

// Solves the stationarity system [P C; -C' Q] [w1; w2] = [-b; c].
// Throws DegenerateGameError when the system is singular or the residuals
// exceed 1e-9.
NashPoint nash_solve(const QuadraticGame& game);

struct ConstantEstimates {
  double delta_hat = 0.0;  // max sampled gradient-difference ratio
  double g_hat = 0.0;      // max sampled gradient norm
};

// Samples point pairs in the centered ball of `region_radius` (each argument
// perturbed separately) over all agents of both teams.
ConstantEstimates estimate_constants(const GameOracle& game, double region_radius,
                                     int samples, rng::Stream& stream);

}  // namespace compdiff::games

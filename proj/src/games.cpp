#include "compdiff/games.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "compdiff/errors.hpp"

namespace compdiff::games {

void GameOracle::check_membership(int team, int agent) const {
  if (team != 1 && team != 2) throw std::invalid_argument("team must be 1 or 2");
  if (agent < 0 || agent >= total_agents())
    throw std::invalid_argument("agent id out of range");
  if (team_of(agent) != team)
    throw std::invalid_argument("agent " + std::to_string(agent) +
                                " does not belong to team " + std::to_string(team));
}

namespace {

void require_shape(const la::Matrix& m, int rows, int cols, const char* name) {
  if (m.rows != rows || m.cols != cols)
    throw std::invalid_argument(std::string(name) + " has the wrong shape");
}

void require_symmetric(const la::Matrix& m, const char* name) {
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < r; ++c)
      if (m.at(r, c) != m.at(c, r))
        throw std::invalid_argument(std::string(name) + " must be symmetric");
}

// Zero-mean per-agent shift rows, flattened row-major. The last agent takes
// the negated sum of the others so each column cancels bitwise.
std::vector<double> make_shifts(int team, int team_size, int dim, double scale,
                                std::uint64_t seed, bool enabled) {
  std::vector<double> s(static_cast<std::size_t>(team_size) * dim, 0.0);
  if (!enabled || team_size < 2 || scale == 0.0) return s;
  for (int k = 0; k + 1 < team_size; ++k) {
    rng::Stream stream(rng::stream_seed(seed, team, k, 0, rng::Purpose::kShifts));
    for (int j = 0; j < dim; ++j)
      s[static_cast<std::size_t>(k) * dim + j] = scale * stream.next_gaussian();
  }
  const int last = team_size - 1;
  for (int j = 0; j < dim; ++j) {
    double acc = 0.0;
    for (int k = 0; k < last; ++k) acc += s[static_cast<std::size_t>(k) * dim + j];
    s[static_cast<std::size_t>(last) * dim + j] = -acc;
  }
  return s;
}

double block_operator_norm(const la::Matrix& left, const la::Matrix& right) {
  Eigen::MatrixXd m(left.rows, left.cols + right.cols);
  for (int r = 0; r < left.rows; ++r) {
    for (int c = 0; c < left.cols; ++c) m(r, c) = left.at(r, c);
    for (int c = 0; c < right.cols; ++c) m(r, left.cols + c) = right.at(r, c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

QuadraticGame::QuadraticGame(Params params) : params_(std::move(params)) {
  if (params_.k1 < 1 || params_.k2 < 1)
    throw std::invalid_argument("team sizes must be >= 1");
  const int m1 = params_.p.rows;
  const int m2 = params_.q.rows;
  if (m1 < 1 || m2 < 1) throw std::invalid_argument("model dimensions must be >= 1");
  require_shape(params_.p, m1, m1, "P");
  require_shape(params_.q, m2, m2, "Q");
  require_shape(params_.c, m1, m2, "C");
  require_symmetric(params_.p, "P");
  require_symmetric(params_.q, "Q");
  if (static_cast<int>(params_.b.size()) != m1)
    throw std::invalid_argument("b must have the team-1 dimension");
  if (static_cast<int>(params_.d.size()) != m2)
    throw std::invalid_argument("c must have the team-2 dimension");
  if (params_.sigma < 0.0) throw std::invalid_argument("noise level must be >= 0");
  const bool shifted = params_.shift_seed >= 0;
  const std::uint64_t seed =
      shifted ? static_cast<std::uint64_t>(params_.shift_seed) : 0;
  beta_ = make_shifts(1, params_.k1, m1, params_.shift_scale, seed, shifted);
  gamma_ = make_shifts(2, params_.k2, m2, params_.shift_scale, seed, shifted);
}

std::span<const double> QuadraticGame::shift(int team, int local) const {
  if (team == 1)
    return std::span<const double>(beta_).subspan(
        static_cast<std::size_t>(local) * params_.p.rows, params_.p.rows);
  return std::span<const double>(gamma_).subspan(
      static_cast<std::size_t>(local) * params_.q.rows, params_.q.rows);
}

double QuadraticGame::local_cost(int team, int agent, std::span<const double> own,
                                 std::span<const double> other) const {
  check_membership(team, agent);
  const int m1 = params_.p.rows, m2 = params_.q.rows;
  std::span<const double> w1 = team == 1 ? own : other;
  std::span<const double> w2 = team == 1 ? other : own;
  std::vector<double> tmp(std::max(m1, m2));
  std::span<double> t1(tmp.data(), m1), t2(tmp.data(), m2);
  la::matvec(params_.p, w1, t1);
  double j = 0.5 * la::dot(w1, t1);
  la::matvec(params_.c, w2, t1);
  j += la::dot(w1, t1);
  la::matvec(params_.q, w2, t2);
  j -= 0.5 * la::dot(w2, t2);
  j += la::dot(params_.b, w1);
  j += la::dot(params_.d, w2);
  const std::span<const double> s = shift(team, local_index(agent));
  if (team == 1) return j + la::dot(s, w1);
  return -j + la::dot(s, w2);
}

void QuadraticGame::local_grad(int team, int agent, std::span<const double> own,
                               std::span<const double> other,
                               std::span<double> out) const {
  check_membership(team, agent);
  const int m1 = params_.p.rows, m2 = params_.q.rows;
  const std::span<const double> s = shift(team, local_index(agent));
  if (team == 1) {
    std::vector<double> tmp(m1);
    la::matvec(params_.p, own, out);
    la::matvec(params_.c, other, tmp);
    for (int i = 0; i < m1; ++i) out[i] += tmp[i] + params_.b[i] + s[i];
  } else {
    std::vector<double> tmp(m2);
    la::matvec(params_.q, own, out);
    la::matvec_t(params_.c, other, tmp);
    for (int i = 0; i < m2; ++i) out[i] += -tmp[i] - params_.d[i] + s[i];
  }
}

void QuadraticGame::stoch_grad(int team, int agent, std::span<const double> own,
                               std::span<const double> other, rng::Stream& stream,
                               std::span<double> out) const {
  local_grad(team, agent, own, other, out);
  if (params_.sigma == 0.0) return;
  const int m = dim(team);
  const double per_coord = params_.sigma / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < m; ++i) out[i] += per_coord * stream.next_gaussian();
}

GameConstants QuadraticGame::constants() const {
  GameConstants k;
  // Joint gradient Lipschitz modulus: the larger of ||[P C]|| and ||[Q C^T]||.
  la::Matrix ct(params_.c.cols, params_.c.rows);
  for (int r = 0; r < params_.c.rows; ++r)
    for (int c = 0; c < params_.c.cols; ++c) ct.at(c, r) = params_.c.at(r, c);
  k.lipschitz = {std::max(block_operator_norm(params_.p, params_.c),
                          block_operator_norm(params_.q, ct)),
                 true};
  k.grad_bound = {0.0, false};  // unbounded globally; estimated along trajectories
  k.noise_var = {params_.sigma * params_.sigma, true};
  return k;
}

NashPoint nash_solve(const QuadraticGame& game) {
  const auto& p = game.params();
  const int m1 = p.p.rows, m2 = p.q.rows;
  Eigen::MatrixXd sys(m1 + m2, m1 + m2);
  Eigen::VectorXd rhs(m1 + m2);
  for (int r = 0; r < m1; ++r) {
    for (int c = 0; c < m1; ++c) sys(r, c) = p.p.at(r, c);
    for (int c = 0; c < m2; ++c) sys(r, m1 + c) = p.c.at(r, c);
    rhs(r) = -p.b[r];
  }
  for (int r = 0; r < m2; ++r) {
    for (int c = 0; c < m1; ++c) sys(m1 + r, c) = -p.c.at(c, r);
    for (int c = 0; c < m2; ++c) sys(m1 + r, m1 + c) = p.q.at(r, c);
    rhs(m1 + r) = p.d[r];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible())
    throw DegenerateGameError("stationarity system is singular; no unique equilibrium");
  Eigen::VectorXd sol = lu.solve(rhs);

  NashPoint nash;
  nash.w1.assign(sol.data(), sol.data() + m1);
  nash.w2.assign(sol.data() + m1, sol.data() + m1 + m2);
  {
    std::vector<double> g(m1);
    game.local_grad(1, 0, nash.w1, nash.w2, g);
    const auto s = game.shift(1, 0);
    for (int i = 0; i < m1; ++i) g[i] -= s[i];
    nash.residual1 = std::sqrt(la::sqnorm(g));
  }
  {
    std::vector<double> g(m2);
    game.local_grad(2, game.team_size(1), nash.w2, nash.w1, g);
    const auto s = game.shift(2, 0);
    for (int i = 0; i < m2; ++i) g[i] -= s[i];
    nash.residual2 = std::sqrt(la::sqnorm(g));
  }
  if (nash.residual1 > 1e-9 || nash.residual2 > 1e-9)
    throw DegenerateGameError("equilibrium residual exceeds tolerance");
  return nash;
}

ConstantEstimates estimate_constants(const GameOracle& game, double region_radius,
                                     int samples, rng::Stream& stream) {
  if (samples < 2) throw std::invalid_argument("need at least two samples");
  if (!(region_radius > 0.0)) throw std::invalid_argument("region radius must be > 0");
  ConstantEstimates est{0.0, 0.0};
  auto ball = [&](std::span<double> out) {
    for (double& v : out) v = region_radius * (2.0 * stream.next_double() - 1.0);
  };
  for (int team = 1; team <= 2; ++team) {
    const int m = game.dim(team);
    const int mo = game.dim(team == 1 ? 2 : 1);
    const int agent = team == 1 ? 0 : game.team_size(1);
    std::vector<double> xa(m + mo), xb(m + mo), ga(m), gb(m);
    for (int s = 0; s < samples; ++s) {
      ball(xa);
      ball(xb);
      std::span<const double> a(xa), b(xb);
      game.local_grad(team, agent, a.first(m), a.subspan(m), ga);
      game.local_grad(team, agent, b.first(m), b.subspan(m), gb);
      est.g_hat = std::max(est.g_hat, std::sqrt(la::sqnorm(ga)));
      est.g_hat = std::max(est.g_hat, std::sqrt(la::sqnorm(gb)));
      double dx = 0.0, dg = 0.0;
      for (int i = 0; i < m + mo; ++i) {
        const double d = xa[i] - xb[i];
        dx += d * d;
      }
      for (int i = 0; i < m; ++i) {
        const double d = ga[i] - gb[i];
        dg += d * d;
      }
      if (dx > 0.0) est.delta_hat = std::max(est.delta_hat, std::sqrt(dg / dx));
    }
  }
  return est;
}

}  // namespace compdiff::games

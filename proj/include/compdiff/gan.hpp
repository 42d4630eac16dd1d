#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "compdiff/games.hpp"
#include "compdiff/rng.hpp"

namespace compdiff::gan {

// One-hidden-layer perceptron, parameters packed flat as
// [W1 (hidden x in, row-major), b1 (hidden), W2 (out x hidden), b2 (out)].
struct MlpArch {
  int in = 0, hidden = 0, out = 0;
  int params() const { return hidden * in + hidden + out * hidden + out; }
  int w1_off() const { return 0; }
  int b1_off() const { return hidden * in; }
  int w2_off() const { return hidden * in + hidden; }
  int b2_off() const { return hidden * in + hidden + out * hidden; }
};

// y = W2 tanh(W1 z + b1) + b2, one sample; scratch must hold `hidden` values.
void mlp_forward_tanh_linear(const MlpArch& arch, std::span<const double> params,
                             std::span<const double> z, std::span<double> y,
                             std::span<double> hidden_scratch);

// Logistic head on top of the tanh layer; the returned probability is clamped
// to [eps, 1 - eps] so downstream logs stay finite. Scratch holds `hidden`.
double disc_forward(const MlpArch& arch, std::span<const double> params,
                    std::span<const double> x, double eps,
                    std::span<double> hidden_scratch);

struct Mixture {
  std::vector<std::vector<double>> means;  // per component
  std::vector<double> variances;           // isotropic per component
  std::vector<double> weights;             // sums to 1

  std::vector<double> mean() const;  // weighted mixture mean
  void sample(rng::Stream& stream, std::span<const double> mean_offset,
              std::span<double> out) const;
};

// Minimax GAN as a two-team game. Team 1 holds discriminator parameters and
// the (per-agent jittered) data distribution, team 2 holds the generator.
// With j(w1, w2) = E log d(h) + E log(1 - d(g(z))):
//   team-1 cost = -j (discriminator ascends j), team-2 cost = +j.
// Stochastic gradients are minibatch gradients; one call consumes, in order,
// a z-batch (team 2 and the fake half of team 1) and a data batch (team 1).
class GanGame : public games::GameOracle {
 public:
  struct Params {
    int k1 = 0, k2 = 0;  // discriminator / generator team sizes
    MlpArch gen;         // noise_dim -> hidden_gen -> data_dim
    MlpArch disc;        // data_dim -> hidden_disc -> 1
    int batch_size = 32;
    double eps_log = 1e-6;
    Mixture target;
    double jitter_scale = 0.0;     // per-discriminator-agent data mean jitter
    std::int64_t jitter_seed = 0;  // < 0 disables jitter
  };

  explicit GanGame(Params params);

  int dim(int team) const override {
    return team == 1 ? params_.disc.params() : params_.gen.params();
  }
  int team_size(int team) const override { return team == 1 ? params_.k1 : params_.k2; }

  // Population cost/gradient are expectations without closed form; these
  // return fixed-seed large-batch estimates (documented surrogate).
  double local_cost(int team, int agent, std::span<const double> own,
                    std::span<const double> other) const override;
  void local_grad(int team, int agent, std::span<const double> own,
                  std::span<const double> other, rng::Stream& stream,
                  std::span<double> out) const;
  void local_grad(int team, int agent, std::span<const double> own,
                  std::span<const double> other, std::span<double> out) const override;

  void stoch_grad(int team, int agent, std::span<const double> own,
                  std::span<const double> other, rng::Stream& stream,
                  std::span<double> out) const override;
  games::GameConstants constants() const override;

  // Batch value of j(w1, w2) = mean log d(h) + mean log(1 - d(g(z))).
  // Both teams' recorded losses derive from this single accumulation, so
  // loss_team1 + loss_team2 == 0 holds bitwise.
  double batch_value(std::span<const double> disc_params, std::span<const double> gen_params,
                     std::span<const double> z_batch, std::span<const double> data_batch,
                     int batch) const;

  // Minibatch gradient at explicit batches; used by stoch_grad and by tests.
  void batch_grad(int team, std::span<const double> own, std::span<const double> other,
                  std::span<const double> z_batch, std::span<const double> data_batch,
                  int batch, std::span<double> out) const;

  // Mean discriminator outputs over explicit real/fake batches.
  struct EvalStats {
    double value = 0.0;  // j on the batches
    double d_real = 0.0;
    double d_fake = 0.0;
    std::vector<double> gen_mean;  // mean generated sample, per coordinate
  };
  EvalStats evaluate(std::span<const double> disc_params, std::span<const double> gen_params,
                     std::span<const double> z_batch, std::span<const double> data_batch,
                     int batch) const;

  std::span<const double> jitter(int local) const;
  const Params& params() const { return params_; }

  // Draws the batches one stoch_grad/eval call consumes: z first, then data
  // from the agent's jittered mixture (base mixture for agent < 0).
  void draw_z_batch(rng::Stream& stream, int batch, std::vector<double>& out) const;
  void draw_data_batch(rng::Stream& stream, int local_agent, int batch,
                       std::vector<double>& out) const;

 private:
  Params params_;
  std::vector<double> jitter_;  // k1 x data_dim, rows sum to zero exactly
};

}  // namespace compdiff::gan

#include "compdiff/gan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "compdiff/linalg.hpp"

namespace compdiff::gan {

namespace {

double logistic(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

constexpr int kSurrogateBatch = 2048;   // fixed-seed batch behind local_cost/grad
constexpr std::uint64_t kSurrogateSeed = 0x6A11u;

}  // namespace

void mlp_forward_tanh_linear(const MlpArch& arch, std::span<const double> params,
                             std::span<const double> z, std::span<double> y,
                             std::span<double> hidden_scratch) {
  const double* w1 = params.data() + arch.w1_off();
  const double* b1 = params.data() + arch.b1_off();
  const double* w2 = params.data() + arch.w2_off();
  const double* b2 = params.data() + arch.b2_off();
  for (int h = 0; h < arch.hidden; ++h) {
    double s = b1[h];
    const double* row = w1 + static_cast<std::size_t>(h) * arch.in;
    for (int i = 0; i < arch.in; ++i) s += row[i] * z[i];
    hidden_scratch[h] = std::tanh(s);
  }
  for (int o = 0; o < arch.out; ++o) {
    double s = b2[o];
    const double* row = w2 + static_cast<std::size_t>(o) * arch.hidden;
    for (int h = 0; h < arch.hidden; ++h) s += row[h] * hidden_scratch[h];
    y[o] = s;
  }
}

double disc_forward(const MlpArch& arch, std::span<const double> params,
                    std::span<const double> x, double eps,
                    std::span<double> hidden_scratch) {
  double s = 0.0;
  mlp_forward_tanh_linear(arch, params, x, {&s, 1}, hidden_scratch);
  return std::clamp(logistic(s), eps, 1.0 - eps);
}

std::vector<double> Mixture::mean() const {
  std::vector<double> m(means.empty() ? 0 : means[0].size(), 0.0);
  for (std::size_t c = 0; c < means.size(); ++c)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += weights[c] * means[c][i];
  return m;
}

void Mixture::sample(rng::Stream& stream, std::span<const double> mean_offset,
                     std::span<double> out) const {
  const double u = stream.next_double();
  std::size_t c = 0;
  double acc = 0.0;
  for (; c + 1 < weights.size(); ++c) {
    acc += weights[c];
    if (u < acc) break;
  }
  const double sd = std::sqrt(variances[c]);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = means[c][i] + sd * stream.next_gaussian();
    if (!mean_offset.empty()) out[i] += mean_offset[i];
  }
}

GanGame::GanGame(Params params) : params_(std::move(params)) {
  if (params_.k1 < 1 || params_.k2 < 1)
    throw std::invalid_argument("team sizes must be >= 1");
  const MlpArch& g = params_.gen;
  const MlpArch& d = params_.disc;
  if (g.in < 1 || g.hidden < 1 || g.out < 1 || d.hidden < 1)
    throw std::invalid_argument("network sizes must be >= 1");
  if (d.in != g.out)
    throw std::invalid_argument("discriminator input must match generator output");
  if (d.out != 1) throw std::invalid_argument("discriminator output must be scalar");
  if (params_.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(params_.eps_log > 0.0) || params_.eps_log > 0.5)
    throw std::invalid_argument("output clamp must lie in (0, 0.5]");
  const Mixture& t = params_.target;
  if (t.means.empty() || t.means.size() != t.variances.size() ||
      t.means.size() != t.weights.size())
    throw std::invalid_argument("mixture components are inconsistent");
  double wsum = 0.0;
  for (std::size_t c = 0; c < t.means.size(); ++c) {
    if (static_cast<int>(t.means[c].size()) != d.in)
      throw std::invalid_argument("mixture mean dimension mismatch");
    if (!(t.variances[c] > 0.0))
      throw std::invalid_argument("mixture variances must be > 0");
    if (t.weights[c] < 0.0) throw std::invalid_argument("mixture weights must be >= 0");
    wsum += t.weights[c];
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("mixture weights must sum to 1");

  // Per-discriminator data-mean jitter, rows cancelling bitwise.
  const int dim = d.in;
  jitter_.assign(static_cast<std::size_t>(params_.k1) * dim, 0.0);
  if (params_.jitter_seed >= 0 && params_.k1 >= 2 && params_.jitter_scale != 0.0) {
    for (int k = 0; k + 1 < params_.k1; ++k) {
      rng::Stream stream(rng::stream_seed(static_cast<std::uint64_t>(params_.jitter_seed),
                                          3, k, 0, rng::Purpose::kShifts));
      for (int i = 0; i < dim; ++i)
        jitter_[static_cast<std::size_t>(k) * dim + i] =
            params_.jitter_scale * stream.next_gaussian();
    }
    const int last = params_.k1 - 1;
    for (int i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (int k = 0; k < last; ++k) acc += jitter_[static_cast<std::size_t>(k) * dim + i];
      jitter_[static_cast<std::size_t>(last) * dim + i] = -acc;
    }
  }
}

std::span<const double> GanGame::jitter(int local) const {
  const int dim = params_.disc.in;
  return std::span<const double>(jitter_).subspan(static_cast<std::size_t>(local) * dim,
                                                  dim);
}

void GanGame::draw_z_batch(rng::Stream& stream, int batch, std::vector<double>& out) const {
  const int n = params_.gen.in;
  out.resize(static_cast<std::size_t>(batch) * n);
  for (double& v : out) v = stream.next_gaussian();
}

void GanGame::draw_data_batch(rng::Stream& stream, int local_agent, int batch,
                              std::vector<double>& out) const {
  const int dim = params_.disc.in;
  out.resize(static_cast<std::size_t>(batch) * dim);
  const std::span<const double> offset =
      local_agent >= 0 ? jitter(local_agent) : std::span<const double>();
  for (int b = 0; b < batch; ++b)
    params_.target.sample(stream, offset,
                          std::span<double>(out).subspan(static_cast<std::size_t>(b) * dim, dim));
}

double GanGame::batch_value(std::span<const double> disc_params,
                            std::span<const double> gen_params,
                            std::span<const double> z_batch,
                            std::span<const double> data_batch, int batch) const {
  const MlpArch& g = params_.gen;
  const MlpArch& d = params_.disc;
  std::vector<double> hg(g.hidden), hd(d.hidden), x(d.in);
  double sum_real = 0.0, sum_fake = 0.0;
  for (int b = 0; b < batch; ++b) {
    const auto sample = data_batch.subspan(static_cast<std::size_t>(b) * d.in, d.in);
    sum_real += std::log(disc_forward(d, disc_params, sample, params_.eps_log, hd));
  }
  for (int b = 0; b < batch; ++b) {
    const auto z = z_batch.subspan(static_cast<std::size_t>(b) * g.in, g.in);
    mlp_forward_tanh_linear(g, gen_params, z, x, hg);
    sum_fake += std::log(1.0 - disc_forward(d, disc_params, x, params_.eps_log, hd));
  }
  return sum_real / batch + sum_fake / batch;
}

namespace {

// Gradient of the discriminator logit s(x) with respect to the disc
// parameters (accumulated into gp scaled by c) and, optionally, x itself.
void disc_backprop(const MlpArch& d, std::span<const double> params,
                   std::span<const double> x, std::span<const double> hidden,
                   double c, std::span<double> gp, std::span<double> gx) {
  const double* w1 = params.data() + d.w1_off();
  const double* w2 = params.data() + d.w2_off();
  double* gw1 = gp.empty() ? nullptr : gp.data() + d.w1_off();
  double* gb1 = gp.empty() ? nullptr : gp.data() + d.b1_off();
  double* gw2 = gp.empty() ? nullptr : gp.data() + d.w2_off();
  double* gb2 = gp.empty() ? nullptr : gp.data() + d.b2_off();
  if (!gp.empty()) {
    for (int h = 0; h < d.hidden; ++h) gw2[h] += c * hidden[h];
    gb2[0] += c;
  }
  if (!gx.empty())
    for (int i = 0; i < d.in; ++i) gx[i] = 0.0;
  for (int h = 0; h < d.hidden; ++h) {
    const double delta = c * w2[h] * (1.0 - hidden[h] * hidden[h]);
    const double* row = w1 + static_cast<std::size_t>(h) * d.in;
    if (!gp.empty()) {
      double* grow = gw1 + static_cast<std::size_t>(h) * d.in;
      for (int i = 0; i < d.in; ++i) grow[i] += delta * x[i];
      gb1[h] += delta;
    }
    if (!gx.empty())
      for (int i = 0; i < d.in; ++i) gx[i] += delta * row[i];
  }
}

}  // namespace

void GanGame::batch_grad(int team, std::span<const double> own,
                         std::span<const double> other, std::span<const double> z_batch,
                         std::span<const double> data_batch, int batch,
                         std::span<double> out) const {
  const MlpArch& g = params_.gen;
  const MlpArch& d = params_.disc;
  const double eps = params_.eps_log;
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> hg(g.hidden), hd(d.hidden), x(d.in), gx(d.in);
  const double inv = 1.0 / batch;

  if (team == 1) {
    // own = disc, other = gen; cost = -j, so flip the sign of dj/d(disc).
    for (int b = 0; b < batch; ++b) {
      const auto sample = data_batch.subspan(static_cast<std::size_t>(b) * d.in, d.in);
      double s = 0.0;
      mlp_forward_tanh_linear(d, own, sample, {&s, 1}, hd);
      const double p = logistic(s);
      if (p < eps || p > 1.0 - eps) continue;  // clamped: flat in the parameters
      // d(-log p)/ds = p - 1
      disc_backprop(d, own, sample, hd, inv * (p - 1.0), out, {});
    }
    for (int b = 0; b < batch; ++b) {
      const auto z = z_batch.subspan(static_cast<std::size_t>(b) * g.in, g.in);
      mlp_forward_tanh_linear(g, other, z, x, hg);
      double s = 0.0;
      mlp_forward_tanh_linear(d, own, x, {&s, 1}, hd);
      const double p = logistic(s);
      if (p < eps || p > 1.0 - eps) continue;
      // d(-log(1-p))/ds = p
      disc_backprop(d, own, x, hd, inv * p, out, {});
    }
    return;
  }

  // team 2: own = gen, other = disc; cost = +j, only the fake term depends on it.
  double* gw1 = out.data() + g.w1_off();
  double* gb1 = out.data() + g.b1_off();
  double* gw2 = out.data() + g.w2_off();
  double* gb2 = out.data() + g.b2_off();
  const double* w2 = own.data() + g.w2_off();
  for (int b = 0; b < batch; ++b) {
    const auto z = z_batch.subspan(static_cast<std::size_t>(b) * g.in, g.in);
    mlp_forward_tanh_linear(g, own, z, x, hg);
    double s = 0.0;
    mlp_forward_tanh_linear(d, other, x, {&s, 1}, hd);
    const double p = logistic(s);
    if (p < eps || p > 1.0 - eps) continue;
    // d log(1-p)/dx = -p * ds/dx
    disc_backprop(d, other, x, hd, inv * -p, {}, gx);
    for (int o = 0; o < g.out; ++o) {
      double* grow = gw2 + static_cast<std::size_t>(o) * g.hidden;
      for (int h = 0; h < g.hidden; ++h) grow[h] += gx[o] * hg[h];
      gb2[o] += gx[o];
    }
    for (int h = 0; h < g.hidden; ++h) {
      double back = 0.0;
      for (int o = 0; o < g.out; ++o)
        back += w2[static_cast<std::size_t>(o) * g.hidden + h] * gx[o];
      const double delta = back * (1.0 - hg[h] * hg[h]);
      double* grow = gw1 + static_cast<std::size_t>(h) * g.in;
      for (int i = 0; i < g.in; ++i) grow[i] += delta * z[i];
      gb1[h] += delta;
    }
  }
}

void GanGame::stoch_grad(int team, int agent, std::span<const double> own,
                         std::span<const double> other, rng::Stream& stream,
                         std::span<double> out) const {
  check_membership(team, agent);
  const int batch = params_.batch_size;
  std::vector<double> z, data;
  draw_z_batch(stream, batch, z);
  if (team == 1) draw_data_batch(stream, local_index(agent), batch, data);
  batch_grad(team, own, other, z, data, batch, out);
}

void GanGame::local_grad(int team, int agent, std::span<const double> own,
                         std::span<const double> other, rng::Stream& stream,
                         std::span<double> out) const {
  check_membership(team, agent);
  std::vector<double> z, data;
  draw_z_batch(stream, kSurrogateBatch, z);
  if (team == 1) draw_data_batch(stream, local_index(agent), kSurrogateBatch, data);
  batch_grad(team, own, other, z, data, kSurrogateBatch, out);
}

void GanGame::local_grad(int team, int agent, std::span<const double> own,
                         std::span<const double> other, std::span<double> out) const {
  rng::Stream stream(
      rng::stream_seed(kSurrogateSeed, 0, agent, 0, rng::Purpose::kEval));
  local_grad(team, agent, own, other, stream, out);
}

double GanGame::local_cost(int team, int agent, std::span<const double> own,
                           std::span<const double> other) const {
  check_membership(team, agent);
  rng::Stream stream(
      rng::stream_seed(kSurrogateSeed, 0, agent, 0, rng::Purpose::kEval));
  std::vector<double> z, data;
  draw_z_batch(stream, kSurrogateBatch, z);
  const int data_agent = team == 1 ? local_index(agent) : -1;
  draw_data_batch(stream, data_agent, kSurrogateBatch, data);
  const std::span<const double> disc = team == 1 ? own : other;
  const std::span<const double> gen = team == 1 ? other : own;
  const double j = batch_value(disc, gen, z, data, kSurrogateBatch);
  return team == 1 ? -j : j;
}

games::GameConstants GanGame::constants() const {
  games::GameConstants k;
  k.lipschitz = {0.0, false};
  k.grad_bound = {0.0, false};
  k.noise_var = {0.0, false};  // minibatch variance has no closed form here
  return k;
}

GanGame::EvalStats GanGame::evaluate(std::span<const double> disc_params,
                                     std::span<const double> gen_params,
                                     std::span<const double> z_batch,
                                     std::span<const double> data_batch,
                                     int batch) const {
  const MlpArch& g = params_.gen;
  const MlpArch& d = params_.disc;
  std::vector<double> hg(g.hidden), hd(d.hidden), x(d.in);
  EvalStats stats;
  stats.gen_mean.assign(d.in, 0.0);
  double sum_real = 0.0, sum_fake = 0.0;
  for (int b = 0; b < batch; ++b) {
    const auto sample = data_batch.subspan(static_cast<std::size_t>(b) * d.in, d.in);
    const double p = disc_forward(d, disc_params, sample, params_.eps_log, hd);
    stats.d_real += p;
    sum_real += std::log(p);
  }
  for (int b = 0; b < batch; ++b) {
    const auto z = z_batch.subspan(static_cast<std::size_t>(b) * g.in, g.in);
    mlp_forward_tanh_linear(g, gen_params, z, x, hg);
    for (int i = 0; i < d.in; ++i) stats.gen_mean[i] += x[i];
    const double p = disc_forward(d, disc_params, x, params_.eps_log, hd);
    stats.d_fake += p;
    sum_fake += std::log(1.0 - p);
  }
  stats.value = sum_real / batch + sum_fake / batch;
  stats.d_real /= batch;
  stats.d_fake /= batch;
  for (double& v : stats.gen_mean) v /= batch;
  return stats;
}

}  // namespace compdiff::gan

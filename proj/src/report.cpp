#include "compdiff/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <system_error>

namespace compdiff::report {

namespace {

// Shortest round-trip decimal form; keeps reruns byte-identical.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double vec_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

nlohmann::json opt_int(const std::optional<std::int64_t>& v) {
  if (v) return *v;
  return nullptr;
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename failed: " + path.string() + ": " + ec.message());
}

std::string metrics_csv(const engine::RunResult& result,
                        const config::ExperimentConfig& cfg) {
  const bool gan = cfg.game_type == config::GameType::kGan;
  bool has_nash = false, has_baseline = false;
  for (const engine::MetricsRecord& r : result.records) {
    has_nash |= r.nash_error.has_value();
    has_baseline |= r.perturbation.has_value();
  }

  std::string out;
  out += "# one row per recorded iteration per run; within/cross columns are max "
         "squared deviations over the team's agents from the team centroids\n";
  out += "run,iter";
  int m1 = 0, m2 = 0, md = 0;
  if (!result.records.empty()) {
    m1 = static_cast<int>(result.records[0].centroid1.size());
    m2 = static_cast<int>(result.records[0].centroid2.size());
  }
  if (gan) {
    out += ",loss_disc,loss_gen,d_real,d_fake";
    md = cfg.gan.data_dim;
    for (int i = 0; i < md; ++i) out += ",gen_mean_" + std::to_string(i);
    out += ",centroid1_norm,centroid2_norm";
  } else {
    for (int i = 0; i < m1; ++i) out += ",centroid1_" + std::to_string(i);
    for (int i = 0; i < m2; ++i) out += ",centroid2_" + std::to_string(i);
  }
  out += ",within1,within2,cross_err1,cross_err2";
  if (has_nash) out += ",nash_error";
  if (has_baseline) out += ",perturbation1,perturbation2,centralized_gap1,centralized_gap2";
  out += "\n";

  for (const engine::MetricsRecord& r : result.records) {
    out += std::to_string(r.run);
    out += ',';
    out += std::to_string(r.iter);
    if (gan) {
      if (r.gan) {
        out += ',' + fmt(r.gan->loss_disc) + ',' + fmt(r.gan->loss_gen) + ',' +
               fmt(r.gan->d_real) + ',' + fmt(r.gan->d_fake);
        for (int i = 0; i < md; ++i)
          out += ',' + (i < static_cast<int>(r.gan->gen_mean.size())
                            ? fmt(r.gan->gen_mean[i])
                            : std::string());
      } else {
        for (int i = 0; i < 4 + md; ++i) out += ',';
      }
      out += ',' + fmt(vec_norm(r.centroid1)) + ',' + fmt(vec_norm(r.centroid2));
    } else {
      for (double v : r.centroid1) out += ',' + fmt(v);
      for (double v : r.centroid2) out += ',' + fmt(v);
    }
    out += ',' + fmt(r.within[0]) + ',' + fmt(r.within[1]) + ',' + fmt(r.cross_err[0]) +
           ',' + fmt(r.cross_err[1]);
    if (has_nash) out += ',' + (r.nash_error ? fmt(*r.nash_error) : std::string());
    if (has_baseline) {
      if (r.perturbation)
        out += ',' + fmt((*r.perturbation)[0]) + ',' + fmt((*r.perturbation)[1]);
      else
        out += ",,";
      if (r.centralized_gap)
        out += ',' + fmt((*r.centralized_gap)[0]) + ',' + fmt((*r.centralized_gap)[1]);
      else
        out += ",,";
    }
    out += '\n';
  }
  return out;
}

nlohmann::json build_summary(const SummaryInputs& in) {
  nlohmann::json j;
  j["schema"] = 1;
  j["config"] = config::resolved_json(*in.cfg);
  j["bound_check_mode"] = "empirical_G";

  nlohmann::json per_team = nlohmann::json::array();
  for (int t = 0; t < 2; ++t) {
    nlohmann::json team;
    team["team"] = t + 1;
    team["lambda2"] = t == 0 ? in.topo->a1.lambda2 : in.topo->a2.lambda2;
    team["rho_sub"] = t == 0 ? in.topo->to_team1.rho_sub : in.topo->to_team2.rho_sub;
    if (in.bound) {
      const diagnostics::TeamBoundCheck& check = in.bound->team[t];
      team["lemma1_bound"] = check.bound;
      team["grad_bound_used"] = check.grad_bound_used;
      team["plateau_within"] = check.plateau_within;
      team["plateau_cross"] = check.plateau_cross;
      team["plateau_perturbation"] = check.plateau_perturbation;
      team["burn_in"] = opt_int(check.burn_in);
      team["bound_holds_post_burn_in"] = check.holds_post_burn_in;
      team["bound_margin"] = in.bound->margin;
    } else {
      team["lemma1_bound"] = nullptr;
      team["plateau_within"] = nullptr;
      team["plateau_cross"] = nullptr;
      team["burn_in"] = nullptr;
    }
    per_team.push_back(std::move(team));
  }
  j["per_team"] = std::move(per_team);

  if (in.result && !in.result->mean.nash_error.empty())
    j["nash_error_final"] = in.result->mean.nash_error.back();
  else
    j["nash_error_final"] = nullptr;

  if (in.nash) {
    j["nash_point"] = {{"w1", in.nash->w1},
                       {"w2", in.nash->w2},
                       {"residual1", in.nash->residual1},
                       {"residual2", in.nash->residual2}};
  }

  if (in.scaling) {
    nlohmann::json mus = nlohmann::json::array();
    nlohmann::json rows = nlohmann::json::array();
    for (const diagnostics::ScalingRow& row : in.scaling->rows) {
      mus.push_back(row.mu);
      rows.push_back({{"mu", row.mu},
                      {"plateau_within", row.plateau_within},
                      {"plateau_cross", row.plateau_cross},
                      {"plateau_perturbation", row.plateau_perturbation},
                      {"burn_in", {opt_int(row.burn_in[0]), opt_int(row.burn_in[1])}},
                      {"nash_error_final", row.nash_error_final}});
    }
    nlohmann::json rw = nlohmann::json::array(), rc = nlohmann::json::array(),
                   rp = nlohmann::json::array();
    for (const diagnostics::ScalingRatios& r : in.scaling->ratios) {
      rw.push_back({r.within[0], r.within[1]});
      rc.push_back({r.cross_err[0], r.cross_err[1]});
      rp.push_back({r.perturbation[0], r.perturbation[1]});
    }
    j["mu_scaling"] = {{"mus", std::move(mus)},
                       {"rows", std::move(rows)},
                       {"ratios_within", std::move(rw)},
                       {"ratios_cross", std::move(rc)},
                       {"ratios_perturbation", std::move(rp)}};
  }

  if (in.gan_final) {
    j["gan_final"] = {{"loss_disc", in.gan_final->loss_disc},
                      {"loss_gen", in.gan_final->loss_gen},
                      {"d_real", in.gan_final->d_real},
                      {"d_fake", in.gan_final->d_fake},
                      {"gen_mean", in.gan_final->gen_mean}};
  }

  nlohmann::json seeds;
  seeds["master_seed"] = in.cfg->engine.master_seed;
  if (in.cfg->game_type == config::GameType::kQuadratic)
    seeds["shift_seed"] = in.cfg->quadratic.shift_seed;
  else
    seeds["jitter_seed"] = in.cfg->gan.jitter_seed;
  if (in.cfg->topology.team1.kind == graph::GraphKind::kRandomConnected)
    seeds["team1_seed"] = in.cfg->topology.team1.seed;
  if (in.cfg->topology.team2.kind == graph::GraphKind::kRandomConnected)
    seeds["team2_seed"] = in.cfg->topology.team2.seed;
  if (!in.cfg->topology.cross.is_explicit)
    seeds["cross_seed"] = in.cfg->topology.cross.seed;
  j["seeds"] = std::move(seeds);

  j["versions"] = {{"program", "1.0.0"},
                   {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};

  if (in.extra.is_object())
    for (const auto& item : in.extra.items()) j[item.key()] = item.value();
  return j;
}

}  // namespace compdiff::report

#include "compdiff/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "compdiff/errors.hpp"

namespace compdiff::config {

namespace {

using nlohmann::json;

std::string join(const std::string& base, const char* key) {
  return base.empty() ? key : base + "." + key;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& path) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(join(path, item.key().c_str()), "unknown key");
  }
}

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(join(path, key), "missing required key");
  return j[key];
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError(path, "expected a non-negative integer");
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(as_number(e, path));
  return v;
}

la::Matrix as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ConfigError(path, "expected a non-empty array of rows");
  la::Matrix m;
  m.rows = static_cast<int>(j.size());
  for (const auto& row : j) {
    if (!row.is_array() || row.empty())
      throw ConfigError(path, "rows must be non-empty arrays");
    if (m.cols == 0)
      m.cols = static_cast<int>(row.size());
    else if (static_cast<int>(row.size()) != m.cols)
      throw ConfigError(path, "rows have inconsistent lengths");
    for (const auto& e : row) m.data.push_back(as_number(e, path));
  }
  return m;
}

TeamSpec parse_team(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(j, {"kind", "size", "p", "seed"}, path);
  TeamSpec spec;
  const std::string kind = as_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "ring")
    spec.kind = graph::GraphKind::kRing;
  else if (kind == "full")
    spec.kind = graph::GraphKind::kFull;
  else if (kind == "random")
    spec.kind = graph::GraphKind::kRandomConnected;
  else
    throw ConfigError(join(path, "kind"), "expected \"ring\", \"full\" or \"random\"");
  spec.size = static_cast<int>(as_integer(require(j, "size", path), join(path, "size")));
  if (spec.size < 1) throw ConfigError(join(path, "size"), "must be >= 1");
  if (j.contains("p")) spec.p = as_number(j["p"], join(path, "p"));
  if (j.contains("seed")) spec.seed = as_seed(j["seed"], join(path, "seed"));
  if (spec.kind == graph::GraphKind::kRandomConnected && !(spec.p > 0.0 && spec.p <= 1.0))
    throw ConfigError(join(path, "p"), "random graphs need p in (0, 1]");
  return spec;
}

TopologySpec parse_topology(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(j, {"team1", "team2", "cross_links", "cross"}, path);
  TopologySpec spec;
  spec.team1 = parse_team(require(j, "team1", path), join(path, "team1"));
  spec.team2 = parse_team(require(j, "team2", path), join(path, "team2"));
  const bool explicit_links = j.contains("cross_links");
  const bool sampled = j.contains("cross");
  if (explicit_links == sampled)
    throw ConfigError(path, "give exactly one of \"cross_links\" and \"cross\"");
  if (explicit_links) {
    const json& links = j["cross_links"];
    const std::string lpath = join(path, "cross_links");
    if (!links.is_array()) throw ConfigError(lpath, "expected an array");
    spec.cross.is_explicit = true;
    for (const auto& e : links) {
      if (!e.is_array() || e.size() != 2)
        throw ConfigError(lpath, "links are [src, dst] pairs of global agent ids");
      spec.cross.links.push_back({static_cast<int>(as_integer(e[0], lpath)),
                                  static_cast<int>(as_integer(e[1], lpath))});
    }
  } else {
    const json& cross = j["cross"];
    const std::string cpath = join(path, "cross");
    if (!cross.is_object()) throw ConfigError(cpath, "expected an object");
    reject_unknown(cross, {"links_per_direction", "seed"}, cpath);
    spec.cross.links_per_direction = static_cast<int>(as_integer(
        require(cross, "links_per_direction", cpath), join(cpath, "links_per_direction")));
    if (spec.cross.links_per_direction < 1)
      throw ConfigError(join(cpath, "links_per_direction"), "must be >= 1");
    if (cross.contains("seed"))
      spec.cross.seed = as_seed(cross["seed"], join(cpath, "seed"));
  }
  return spec;
}

QuadraticSpec parse_quadratic(const json& j, const std::string& path) {
  reject_unknown(j,
                 {"type", "P", "Q", "C", "b", "c", "sigma", "shift_seed", "shift_scale"},
                 path);
  QuadraticSpec spec;
  spec.p = as_matrix(require(j, "P", path), join(path, "P"));
  spec.q = as_matrix(require(j, "Q", path), join(path, "Q"));
  spec.c = as_matrix(require(j, "C", path), join(path, "C"));
  spec.b = as_vector(require(j, "b", path), join(path, "b"));
  spec.d = as_vector(require(j, "c", path), join(path, "c"));
  spec.m1 = spec.p.rows;
  spec.m2 = spec.q.rows;
  if (spec.p.cols != spec.m1) throw ConfigError(join(path, "P"), "must be square");
  if (spec.q.cols != spec.m2) throw ConfigError(join(path, "Q"), "must be square");
  if (spec.c.rows != spec.m1 || spec.c.cols != spec.m2)
    throw ConfigError(join(path, "C"), "must be M1 x M2");
  if (static_cast<int>(spec.b.size()) != spec.m1)
    throw ConfigError(join(path, "b"), "length must match P");
  if (static_cast<int>(spec.d.size()) != spec.m2)
    throw ConfigError(join(path, "c"), "length must match Q");
  if (j.contains("sigma")) {
    spec.sigma = as_number(j["sigma"], join(path, "sigma"));
    if (spec.sigma < 0.0) throw ConfigError(join(path, "sigma"), "must be >= 0");
  }
  if (j.contains("shift_seed"))
    spec.shift_seed = as_integer(j["shift_seed"], join(path, "shift_seed"));
  if (j.contains("shift_scale"))
    spec.shift_scale = as_number(j["shift_scale"], join(path, "shift_scale"));
  return spec;
}

gan::Mixture parse_mixture(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(j, {"means", "variances", "weights"}, path);
  gan::Mixture mix;
  const json& means = require(j, "means", path);
  if (!means.is_array() || means.empty())
    throw ConfigError(join(path, "means"), "expected a non-empty array of points");
  for (const auto& m : means) mix.means.push_back(as_vector(m, join(path, "means")));
  mix.variances = as_vector(require(j, "variances", path), join(path, "variances"));
  if (j.contains("weights"))
    mix.weights = as_vector(j["weights"], join(path, "weights"));
  else
    mix.weights.assign(mix.means.size(), 1.0 / mix.means.size());
  if (mix.variances.size() != mix.means.size() || mix.weights.size() != mix.means.size())
    throw ConfigError(path, "means, variances and weights must have equal lengths");
  return mix;
}

GanSpec parse_gan(const json& j, const std::string& path) {
  reject_unknown(j,
                 {"type", "noise_dim", "data_dim", "hidden_gen", "hidden_disc",
                  "batch_size", "eps_log", "target", "jitter_scale", "jitter_seed"},
                 path);
  GanSpec spec;
  auto opt_int = [&](const char* key, int& out) {
    if (j.contains(key)) {
      out = static_cast<int>(as_integer(j[key], join(path, key)));
      if (out < 1) throw ConfigError(join(path, key), "must be >= 1");
    }
  };
  opt_int("noise_dim", spec.noise_dim);
  opt_int("data_dim", spec.data_dim);
  opt_int("hidden_gen", spec.hidden_gen);
  opt_int("hidden_disc", spec.hidden_disc);
  opt_int("batch_size", spec.batch_size);
  if (j.contains("eps_log")) {
    spec.eps_log = as_number(j["eps_log"], join(path, "eps_log"));
    if (!(spec.eps_log > 0.0 && spec.eps_log <= 0.5))
      throw ConfigError(join(path, "eps_log"), "must lie in (0, 0.5]");
  }
  spec.target = parse_mixture(require(j, "target", path), join(path, "target"));
  for (const auto& m : spec.target.means)
    if (static_cast<int>(m.size()) != spec.data_dim)
      throw ConfigError(join(path, "target"), "component means must have data_dim entries");
  if (j.contains("jitter_scale"))
    spec.jitter_scale = as_number(j["jitter_scale"], join(path, "jitter_scale"));
  if (j.contains("jitter_seed"))
    spec.jitter_seed = as_integer(j["jitter_seed"], join(path, "jitter_seed"));
  return spec;
}

EngineSpec parse_engine(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(j, {"mu", "horizon", "mc_runs", "master_seed", "init", "baseline"}, path);
  EngineSpec spec;
  spec.mu = as_number(require(j, "mu", path), join(path, "mu"));
  if (!(spec.mu > 0.0)) throw ConfigError(join(path, "mu"), "must be > 0");
  if (j.contains("horizon")) {
    spec.horizon = as_integer(j["horizon"], join(path, "horizon"));
    if (spec.horizon < 0) throw ConfigError(join(path, "horizon"), "must be >= 0");
  }
  if (j.contains("mc_runs")) {
    spec.mc_runs = static_cast<int>(as_integer(j["mc_runs"], join(path, "mc_runs")));
    if (spec.mc_runs < 1) throw ConfigError(join(path, "mc_runs"), "must be >= 1");
  }
  if (j.contains("master_seed"))
    spec.master_seed = as_seed(j["master_seed"], join(path, "master_seed"));
  if (j.contains("init")) {
    const json& init = j["init"];
    const std::string ipath = join(path, "init");
    if (!init.is_object()) throw ConfigError(ipath, "expected an object");
    reject_unknown(init, {"kind", "scale"}, ipath);
    const std::string kind = as_string(require(init, "kind", ipath), join(ipath, "kind"));
    if (kind == "zeros")
      spec.init.kind = engine::InitSpec::Kind::kZeros;
    else if (kind == "gaussian")
      spec.init.kind = engine::InitSpec::Kind::kGaussian;
    else
      throw ConfigError(join(ipath, "kind"), "expected \"zeros\" or \"gaussian\"");
    if (init.contains("scale"))
      spec.init.scale = as_number(init["scale"], join(ipath, "scale"));
  }
  if (j.contains("baseline")) spec.baseline = as_bool(j["baseline"], join(path, "baseline"));
  return spec;
}

DiagnosticsSpec parse_diagnostics(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(j, {"window", "rel_tol", "record_every"}, path);
  DiagnosticsSpec spec;
  if (j.contains("window")) {
    spec.window = as_integer(j["window"], join(path, "window"));
    if (spec.window < 0) throw ConfigError(join(path, "window"), "must be >= 0");
  }
  if (j.contains("rel_tol")) {
    spec.rel_tol = as_number(j["rel_tol"], join(path, "rel_tol"));
    if (spec.rel_tol < 0.0) throw ConfigError(join(path, "rel_tol"), "must be >= 0");
  }
  if (j.contains("record_every")) {
    spec.record_every = as_integer(j["record_every"], join(path, "record_every"));
    if (spec.record_every < 1) throw ConfigError(join(path, "record_every"), "must be >= 1");
  }
  return spec;
}

OutputSpec parse_output(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(j, {"dir", "csv", "summary"}, path);
  OutputSpec spec;
  if (j.contains("dir")) spec.dir = as_string(j["dir"], join(path, "dir"));
  if (j.contains("csv")) spec.csv = as_bool(j["csv"], join(path, "csv"));
  if (j.contains("summary")) spec.summary = as_bool(j["summary"], join(path, "summary"));
  return spec;
}

json matrix_json(const la::Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json team_json(const TeamSpec& spec) {
  json j;
  switch (spec.kind) {
    case graph::GraphKind::kRing: j["kind"] = "ring"; break;
    case graph::GraphKind::kFull: j["kind"] = "full"; break;
    case graph::GraphKind::kRandomConnected: j["kind"] = "random"; break;
  }
  j["size"] = spec.size;
  if (spec.kind == graph::GraphKind::kRandomConnected) {
    j["p"] = spec.p;
    j["seed"] = spec.seed;
  }
  return j;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& root) {
  const nlohmann::json& j =
      root.is_object() && root.contains("config") ? root["config"] : root;
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  reject_unknown(j, {"game", "topology", "engine", "diagnostics", "output"}, "");

  ExperimentConfig cfg;
  const nlohmann::json& game = require(j, "game", "");
  if (!game.is_object()) throw ConfigError("game", "expected an object");
  const std::string type = as_string(require(game, "type", "game"), "game.type");
  if (type == "quadratic") {
    cfg.game_type = GameType::kQuadratic;
    cfg.quadratic = parse_quadratic(game, "game");
  } else if (type == "gan") {
    cfg.game_type = GameType::kGan;
    cfg.gan = parse_gan(game, "game");
  } else {
    throw ConfigError("game.type", "expected \"quadratic\" or \"gan\"");
  }
  cfg.topology = parse_topology(require(j, "topology", ""), "topology");
  cfg.engine = parse_engine(require(j, "engine", ""), "engine");
  if (j.contains("diagnostics"))
    cfg.diagnostics = parse_diagnostics(j["diagnostics"], "diagnostics");
  if (j.contains("output")) cfg.output = parse_output(j["output"], "output");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

nlohmann::json resolved_json(const ExperimentConfig& cfg) {
  json j;
  json game;
  if (cfg.game_type == GameType::kQuadratic) {
    const QuadraticSpec& q = cfg.quadratic;
    game["type"] = "quadratic";
    game["P"] = matrix_json(q.p);
    game["Q"] = matrix_json(q.q);
    game["C"] = matrix_json(q.c);
    game["b"] = q.b;
    game["c"] = q.d;
    game["sigma"] = q.sigma;
    game["shift_seed"] = q.shift_seed;
    game["shift_scale"] = q.shift_scale;
  } else {
    const GanSpec& g = cfg.gan;
    game["type"] = "gan";
    game["noise_dim"] = g.noise_dim;
    game["data_dim"] = g.data_dim;
    game["hidden_gen"] = g.hidden_gen;
    game["hidden_disc"] = g.hidden_disc;
    game["batch_size"] = g.batch_size;
    game["eps_log"] = g.eps_log;
    game["target"] = {{"means", g.target.means},
                      {"variances", g.target.variances},
                      {"weights", g.target.weights}};
    game["jitter_scale"] = g.jitter_scale;
    game["jitter_seed"] = g.jitter_seed;
  }
  j["game"] = std::move(game);

  json topo;
  topo["team1"] = team_json(cfg.topology.team1);
  topo["team2"] = team_json(cfg.topology.team2);
  if (cfg.topology.cross.is_explicit) {
    json links = json::array();
    for (const auto& l : cfg.topology.cross.links) links.push_back({l.src, l.dst});
    topo["cross_links"] = std::move(links);
  } else {
    topo["cross"] = {{"links_per_direction", cfg.topology.cross.links_per_direction},
                     {"seed", cfg.topology.cross.seed}};
  }
  j["topology"] = std::move(topo);

  j["engine"] = {
      {"mu", cfg.engine.mu},
      {"horizon", cfg.engine.horizon},
      {"mc_runs", cfg.engine.mc_runs},
      {"master_seed", cfg.engine.master_seed},
      {"init",
       {{"kind", cfg.engine.init.kind == engine::InitSpec::Kind::kZeros ? "zeros" : "gaussian"},
        {"scale", cfg.engine.init.scale}}},
      {"baseline", cfg.baseline_enabled()},
  };
  j["diagnostics"] = {{"window", cfg.diagnostics.window},
                      {"rel_tol", cfg.diagnostics.rel_tol},
                      {"record_every", cfg.diagnostics.record_every}};
  j["output"] = {{"dir", cfg.output.dir},
                 {"csv", cfg.output.csv},
                 {"summary", cfg.output.summary}};
  return j;
}

graph::NetworkTopology build_topology(const TopologySpec& spec) {
  graph::TeamGraph t1 =
      graph::build_team_graph(spec.team1.kind, spec.team1.size, spec.team1.p,
                              spec.team1.seed, 1);
  graph::TeamGraph t2 =
      graph::build_team_graph(spec.team2.kind, spec.team2.size, spec.team2.p,
                              spec.team2.seed, 2);
  std::vector<graph::CrossLink> links =
      spec.cross.is_explicit
          ? spec.cross.links
          : graph::sample_cross_links(spec.team1.size, spec.team2.size,
                                      spec.cross.links_per_direction, spec.cross.seed);
  return graph::make_topology(std::move(t1), std::move(t2), std::move(links));
}

std::unique_ptr<games::GameOracle> build_game(const ExperimentConfig& cfg, int k1, int k2) {
  if (cfg.game_type == GameType::kQuadratic) {
    const QuadraticSpec& q = cfg.quadratic;
    games::QuadraticGame::Params p;
    p.k1 = k1;
    p.k2 = k2;
    p.p = q.p;
    p.q = q.q;
    p.c = q.c;
    p.b = q.b;
    p.d = q.d;
    p.sigma = q.sigma;
    p.shift_seed = q.shift_seed;
    p.shift_scale = q.shift_scale;
    try {
      return std::make_unique<games::QuadraticGame>(std::move(p));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("game", e.what());
    }
  }
  const GanSpec& g = cfg.gan;
  gan::GanGame::Params p;
  p.k1 = k1;
  p.k2 = k2;
  p.gen = {g.noise_dim, g.hidden_gen, g.data_dim};
  p.disc = {g.data_dim, g.hidden_disc, 1};
  p.batch_size = g.batch_size;
  p.eps_log = g.eps_log;
  p.target = g.target;
  p.jitter_scale = g.jitter_scale;
  p.jitter_seed = g.jitter_seed;
  try {
    return std::make_unique<gan::GanGame>(std::move(p));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("game", e.what());
  }
}

std::int64_t effective_window(const DiagnosticsSpec& spec, std::int64_t series_len) {
  if (spec.window > 0) return spec.window;
  return std::max<std::int64_t>(1, series_len / 10);
}

}  // namespace compdiff::config

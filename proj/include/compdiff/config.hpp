#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "compdiff/engine.hpp"
#include "compdiff/gan.hpp"
#include "compdiff/games.hpp"
#include "compdiff/graph.hpp"

namespace compdiff::config {

struct TeamSpec {
  graph::GraphKind kind = graph::GraphKind::kRing;
  int size = 0;
  double p = 0.0;          // random kind only
  std::uint64_t seed = 0;  // random kind only
};

struct CrossSpec {
  std::vector<graph::CrossLink> links;  // explicit, or
  int links_per_direction = 0;          // sampled with `seed`
  std::uint64_t seed = 0;
  bool is_explicit = false;
};

struct TopologySpec {
  TeamSpec team1, team2;
  CrossSpec cross;
};

struct QuadraticSpec {
  int m1 = 0, m2 = 0;
  la::Matrix p, q, c;
  std::vector<double> b, d;
  double sigma = 0.0;
  std::int64_t shift_seed = -1;
  double shift_scale = 1.0;
};

struct GanSpec {
  int noise_dim = 2, data_dim = 2, hidden_gen = 16, hidden_disc = 16;
  int batch_size = 32;
  double eps_log = 1e-6;
  gan::Mixture target;
  double jitter_scale = 0.1;
  std::int64_t jitter_seed = 0;
};

struct EngineSpec {
  double mu = 0.0;
  std::int64_t horizon = 20000;
  int mc_runs = 100;
  std::uint64_t master_seed = 1;
  engine::InitSpec init;
  std::optional<bool> baseline;  // default: on for quadratic, off for gan
};

struct DiagnosticsSpec {
  std::int64_t window = 0;  // 0 = 10% of the series length
  double rel_tol = 0.15;
  std::int64_t record_every = 10;
};

struct OutputSpec {
  std::string dir = "out";
  bool csv = true;
  bool summary = true;
};

enum class GameType { kQuadratic, kGan };

struct ExperimentConfig {
  GameType game_type = GameType::kQuadratic;
  QuadraticSpec quadratic;
  GanSpec gan;
  TopologySpec topology;
  EngineSpec engine;
  DiagnosticsSpec diagnostics;
  OutputSpec output;

  bool baseline_enabled() const {
    return engine.baseline.value_or(game_type == GameType::kQuadratic);
  }
};

// Strict parse: unknown keys, wrong types, or invalid values raise ConfigError
// with the offending key path. A top-level "config" object (as written into
// summary.json) is unwrapped first, so a summary file re-runs as a config.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);

// The config with all defaults made explicit; embedding this in summary.json
// and re-running it reproduces the metrics byte for byte.
nlohmann::json resolved_json(const ExperimentConfig& cfg);

graph::NetworkTopology build_topology(const TopologySpec& spec);
std::unique_ptr<games::GameOracle> build_game(const ExperimentConfig& cfg, int k1, int k2);

std::int64_t effective_window(const DiagnosticsSpec& spec, std::int64_t series_len);

}  // namespace compdiff::config

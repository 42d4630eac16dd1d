#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "compdiff/config.hpp"
#include "compdiff/diagnostics.hpp"
#include "compdiff/engine.hpp"

namespace compdiff::report {

// Writes via a temp file in the same directory plus rename, so readers never
// observe a partial file. Throws std::runtime_error on I/O failure.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

// One `#`-prefixed schema comment, a header row, then one row per recorded
// iteration per run. Quadratic runs list centroid components; GAN runs list
// losses, discriminator outputs, generated-sample means and centroid norms.
std::string metrics_csv(const engine::RunResult& result, const config::ExperimentConfig& cfg);

struct SummaryInputs {
  const config::ExperimentConfig* cfg = nullptr;
  const graph::NetworkTopology* topo = nullptr;
  const engine::RunResult* result = nullptr;
  std::optional<diagnostics::BoundReport> bound;
  std::optional<diagnostics::ScalingTable> scaling;
  std::optional<games::NashPoint> nash;
  std::optional<engine::GanMetrics> gan_final;
  nlohmann::json extra;  // merged into the top level (e.g. threshold notes)
};

nlohmann::json build_summary(const SummaryInputs& in);

}  // namespace compdiff::report

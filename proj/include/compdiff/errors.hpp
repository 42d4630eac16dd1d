#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace compdiff {

// Topology fails the connectivity/spectral requirements the algorithm needs
// (no cross-team link into a receiving team, non-contracting matrices, ...).
class AssumptionViolation : public std::runtime_error {
 public:
  explicit AssumptionViolation(const std::string& what) : std::runtime_error(what) {}
};

// An iterate turned non-finite during a run.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int run, std::int64_t iter, const std::string& what)
      : std::runtime_error(what), run_(run), iter_(iter) {}
  int run() const { return run_; }
  std::int64_t iteration() const { return iter_; }

 private:
  int run_;
  std::int64_t iter_;
};

// Configuration errors carry the offending key path, e.g. "game.P".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

// Singular stationarity system: the game has no unique interior equilibrium.
class DegenerateGameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace compdiff

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/experiments.hpp"
#include "cutoff/models.hpp"

namespace cutoff {

/// Declarative experiment: one model/x0 scenario, a list of epsilons,
/// a c grid and a set of tasks. Parsed strictly: unknown keys are
/// configuration errors.
struct ExperimentConfig {
  PotentialModel model = PotentialModel::ou_diagonal(Eigen::VectorXd::Ones(1));
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  std::vector<double> epsilons{1e-3};
  std::vector<double> c_grid;  // default -3..3 step 0.5
  double gamma = 1.0 / 16.0;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output_dir = "out";
  std::vector<std::string> tasks;  // profile, curve-exact, curve-fp, curve-kde,
                                   // moments, truncation, rotating, lemmas,
                                   // semiflow, lyapunov
  // Task knobs.
  CurveControls controls;
  double moments_t_end = 5.0;
  int moments_paths = 10000;
  std::vector<double> truncation_m{3.0, 5.0};
  int truncation_paths = 10000;
  double rotating_a = 1.0;
  double rotating_b = 1.0;
  int lemma_cases = 100;
  double semiflow_t_end = 10.0;
  double lyapunov_t_end = 0.0;  // 0: 20 / delta
  double verdict_high = 0.9;
  double verdict_low = 0.1;

  std::string raw_json;  // canonical serialized form, hashed into the manifest
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Strict model parser shared with the CLI: {"kind": "ou-diagonal"|
/// "quadratic"|"quartic-1d"|"custom-polynomial"|"truncated", ...}.
PotentialModel parse_model_json(const std::string& json_text);

struct TaskStatus {
  std::string name;
  bool ok = false;
  std::string message;
  std::uint64_t seed = 0;
  std::vector<std::string> files;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  double gamma = 0.0;
  long long wall_clock_ms = 0;
  std::vector<TaskStatus> tasks;

  bool all_ok() const {
    for (const auto& t : tasks)
      if (!t.ok) return false;
    return true;
  }
};

/// Executes the configured tasks, writes CSV outputs plus
/// manifest.json under config.output_dir. Re-running with the same
/// config and seeds produces byte-identical CSVs at any worker count.
RunManifest run_experiment(const ExperimentConfig& config);

void write_manifest(const RunManifest& manifest, const std::string& path);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace cutoff

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsmf/attacks.hpp"
#include "fsmf/consensus.hpp"
#include "fsmf/ellipsoid.hpp"
#include "fsmf/fuzzy.hpp"
#include "fsmf/plant.hpp"

namespace fsmf {

struct AgentConfig {
  std::string name;
  TSModel model;  // rule A_leader filled from the leader section
  QuadraticPlant plant;
  VectorXd x0;
  EllipsoidD estimate;    // X(0|0)
  EllipsoidD leader_set;  // U(0)
};

struct ScenarioConfig {
  std::string name;
  int horizon = 50;
  std::vector<AgentConfig> agents;
  Topology topology;
  VectorXd leader_x0;

  NoiseMode noise_mode = NoiseMode::Sinusoid;
  std::uint64_t seed = 1;
  Sinusoid process_noise{0.5, 2.0};
  Sinusoid measurement_noise{0.5, 20.0};
  BoundSchedule Q, R;

  AttackScenario attack;

  std::string backend = "ipm";
  double tol = 1e-7;
  double multiplier_weight = 0.0;
  int fallback_budget = 10;
  double intersect_margin = 0.0;
  bool recovery = true;

  std::string output_dir = "out";
  std::vector<int> snapshots{22, 23, 24};

  /// Throws ConfigParse on semantic errors.
  void validate() const;
};

/// Parses YAML (any extension other than .json) or JSON text.
ScenarioConfig parse_scenario(const std::string& text, bool json);
/// Throws ConfigParse, IoFailure.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// {"center": [...], "shape": [[...], ...]}
EllipsoidD load_ellipsoid_json(const std::filesystem::path& path);

}  // namespace fsmf

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hswarm/exec.hpp"
#include "hswarm/orchestrator.hpp"
#include "hswarm/remote.hpp"
#include "hswarm/utility.hpp"

namespace hswarm {

/// Which built-in utility to optimize and its parameters.
struct UtilitySpec {
  std::string name = "affine_target";  // affine_target | hidden_dag | constant | remote_dataset
  // affine_target
  std::size_t dim = 2;
  std::size_t dataset_size = 8;
  double pool_noise = 0.3;
  // constant
  double value = 0.0;
  // hidden_dag; drawn from the task seed when absent
  std::optional<nlohmann::json> hidden;
  // remote_dataset
  std::string dataset;
  std::vector<std::string> endpoints;
  long timeout_ms = 30000;
  int retries = 0;
};

struct AppConfig {
  RunConfig run;
  UtilitySpec utility;
};

/// Parses a JSON config document; absent keys keep their defaults (N=10,
/// M=10, top_p=0.8, patience=6, max_iterations=20, pool 10 x 1). Empty text
/// is the all-default config. Unknown keys, wrong types and out-of-range
/// values raise ConfigError naming the key.
AppConfig parse_config_text(const std::string& text);
AppConfig parse_config(const std::string& path);

nlohmann::json to_json(const AppConfig& cfg);

/// A utility plus the pool it starts from.
struct Workload {
  std::shared_ptr<const UtilityFunction> utility;
  ExpertPool initial_pool;
  /// Hidden structure for synthetic tasks, for reporting.
  std::optional<DagStructure> hidden_dag;
};

/// Builds the named utility and its starting pool. Synthetic task data is
/// drawn from the run seed, so (config, seed) determines the workload.
Workload make_workload(const AppConfig& cfg);

/// Pool directory: manifest.json plus one expert_<k>.json per expert.
void save_pool(const std::string& dir, const ExpertPool& pool);
ExpertPool load_pool(const std::string& dir);

}  // namespace hswarm

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cliq/cluster.hpp"
#include "cliq/embed.hpp"
#include "cliq/extractsim.hpp"
#include "cliq/genquery.hpp"

namespace cliq {

enum class TeacherBackend { kApi, kMock };

// Every knob of a run. Defaults reproduce the published clustering and
// generation hyperparameters.
struct RunConfig {
  std::string dataset_path;
  std::string artifact_dir = "artifacts";
  std::uint64_t seed = 42;

  EmbeddingBackendConfig embedding;
  std::string embedding_api_key_env = "CLIQ_EMBEDDING_API_KEY";

  ClusteringConfig clustering;
  // Unset: the clustering stage uses the master seed itself.
  std::optional<std::uint64_t> clustering_seed;

  TeacherEndpointConfig teacher;
  TeacherBackend teacher_backend = TeacherBackend::kApi;
  std::string teacher_api_key_env = "OPENAI_API_KEY";
  std::size_t examples_per_cluster = 1000;
  std::size_t queries_per_cluster = 10;

  std::vector<std::size_t> analysis_budgets;  // empty: derived from the pool
  std::size_t analysis_trials = 100;
  std::size_t redundancy_exact_threshold = 2000;
  std::size_t redundancy_sample_pairs = 10000;

  sim::WorldParams sim_world;
  double sim_noise_sigma = 0.05;
  double sim_quant_step = 0.0;
  std::vector<sim::ExtractionStrategy> sim_strategies{sim::ExtractionStrategy::kRandomUniform,
                                                      sim::ExtractionStrategy::kCliqUniform};
  std::vector<std::size_t> sim_budgets{30, 60, 150, 300};
  std::size_t sim_m_per_cluster = 0;
  std::size_t sim_trials = 20;

  // Stage seeds: clustering uses the master seed; every other stage derives
  // its own from (master seed, stage name).
  std::uint64_t stage_seed(std::string_view stage) const;
  ClusteringConfig resolved_clustering() const;
  EmbeddingBackendConfig resolved_embedding() const;

  void validate() const;

  // Every field with defaults applied. Only environment variable *names* of
  // secrets appear, never their values.
  nlohmann::ordered_json to_json() const;
};

// Applies `key = value` (dotted key names as in the config file).
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

// Flat YAML mapping of dotted keys to scalars (lists as YAML sequences or
// comma-separated strings). ${VAR} references in values are expanded.
RunConfig load_config_file(const std::filesystem::path& path);
void apply_config_yaml(RunConfig& config, std::string_view yaml_text);

// "key=value" override strings, as passed with --set.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

std::string expand_env(std::string_view value);

}  // namespace cliq

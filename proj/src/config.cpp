#include "cliq/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq {

using nlohmann::ordered_json;

std::uint64_t RunConfig::stage_seed(std::string_view stage) const {
  if (stage == "cluster") return clustering_seed.value_or(seed);
  return derive_seed(seed, stage);
}

ClusteringConfig RunConfig::resolved_clustering() const {
  ClusteringConfig c = clustering;
  c.seed = stage_seed("cluster");
  return c;
}

EmbeddingBackendConfig RunConfig::resolved_embedding() const {
  EmbeddingBackendConfig e = embedding;
  e.seed = stage_seed("embed");
  return e;
}

void RunConfig::validate() const {
  embedding.validate();
  teacher.validate();
  if (clustering.k < 1) throw InputError("config", "clustering.k must be positive");
  if (clustering.max_iterations < 1) {
    throw InputError("config", "clustering.max_iterations must be positive");
  }
  if (clustering.min_cluster_size < 1) {
    throw InputError("config", "clustering.min_cluster_size must be positive");
  }
  if (examples_per_cluster < 1) throw InputError("config", "generation.examples_per_cluster must be positive");
  if (queries_per_cluster < 1) throw InputError("config", "generation.queries_per_cluster must be positive");
  if (analysis_trials < 1) throw InputError("config", "analysis.trials must be positive");
  if (sim_trials < 1) throw InputError("config", "simulation.trials must be positive");
  if (artifact_dir.empty()) throw InputError("config", "artifact_dir is empty");
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  T value{};
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw InputError("config", "invalid value \"" + s + "\" for " + std::string(key));
  }
  return value;
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw InputError("config", "invalid value \"" + s + "\" for " + std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError("config", "invalid boolean \"" + s + "\" for " + std::string(key));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string s = trim(text);
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (auto t = trim(item); !t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

struct Field {
  std::string key;
  std::function<ordered_json(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define CLIQ_SIZE_FIELD(name, member)                                            \
  Field {                                                                        \
    name, [](const RunConfig& c) { return ordered_json(c.member); },            \
        [](RunConfig& c, std::string_view v) { c.member = parse_number<std::size_t>(name, v); } \
  }
#define CLIQ_DOUBLE_FIELD(name, member)                                   \
  Field {                                                                 \
    name, [](const RunConfig& c) { return ordered_json(c.member); },     \
        [](RunConfig& c, std::string_view v) { c.member = parse_double(name, v); } \
  }
#define CLIQ_STRING_FIELD(name, member)                                   \
  Field {                                                                 \
    name, [](const RunConfig& c) { return ordered_json(c.member); },     \
        [](RunConfig& c, std::string_view v) { c.member = trim(v); }     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CLIQ_STRING_FIELD("dataset_path", dataset_path),
      CLIQ_STRING_FIELD("artifact_dir", artifact_dir),
      Field{"seed", [](const RunConfig& c) { return ordered_json(c.seed); },
            [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); }},

      Field{"embedding.backend",
            [](const RunConfig& c) { return ordered_json(to_string(c.embedding.kind)); },
            [](RunConfig& c, std::string_view v) { c.embedding.kind = parse_embedding_backend(trim(v)); }},
      CLIQ_SIZE_FIELD("embedding.dim", embedding.dim),
      CLIQ_STRING_FIELD("embedding.base_url", embedding.base_url),
      CLIQ_STRING_FIELD("embedding.model", embedding.model),
      CLIQ_SIZE_FIELD("embedding.batch_size", embedding.batch_size),
      CLIQ_SIZE_FIELD("embedding.max_text_length", embedding.max_text_length),
      CLIQ_SIZE_FIELD("embedding.max_in_flight", embedding.max_in_flight),
      CLIQ_STRING_FIELD("embedding.api_key_env", embedding_api_key_env),

      CLIQ_SIZE_FIELD("clustering.k", clustering.k),
      Field{"clustering.seed",
            [](const RunConfig& c) { return ordered_json(c.stage_seed("cluster")); },
            [](RunConfig& c, std::string_view v) {
              c.clustering_seed = parse_number<std::uint64_t>("clustering.seed", v);
            }},
      CLIQ_SIZE_FIELD("clustering.minibatch_size", clustering.minibatch_size),
      CLIQ_SIZE_FIELD("clustering.max_iterations", clustering.max_iterations),
      CLIQ_SIZE_FIELD("clustering.min_cluster_size", clustering.min_cluster_size),
      CLIQ_DOUBLE_FIELD("clustering.tolerance", clustering.tolerance),

      Field{"generation.backend",
            [](const RunConfig& c) {
              return ordered_json(c.teacher_backend == TeacherBackend::kApi ? "api" : "mock");
            },
            [](RunConfig& c, std::string_view v) {
              const auto s = trim(v);
              if (s == "api") {
                c.teacher_backend = TeacherBackend::kApi;
              } else if (s == "mock") {
                c.teacher_backend = TeacherBackend::kMock;
              } else {
                throw InputError("config", "generation.backend must be api or mock");
              }
            }},
      CLIQ_STRING_FIELD("generation.base_url", teacher.base_url),
      CLIQ_STRING_FIELD("generation.model", teacher.model_name),
      CLIQ_DOUBLE_FIELD("generation.temperature", teacher.temperature),
      CLIQ_SIZE_FIELD("generation.max_tokens", teacher.max_tokens),
      Field{"generation.timeout_s",
            [](const RunConfig& c) { return ordered_json(c.teacher.timeout.count()); },
            [](RunConfig& c, std::string_view v) {
              c.teacher.timeout = Seconds(parse_double("generation.timeout_s", v));
            }},
      Field{"generation.max_attempts",
            [](const RunConfig& c) { return ordered_json(c.teacher.max_attempts); },
            [](RunConfig& c, std::string_view v) {
              c.teacher.max_attempts = parse_number<int>("generation.max_attempts", v);
            }},
      Field{"generation.backoff_base_s",
            [](const RunConfig& c) { return ordered_json(c.teacher.backoff_base.count()); },
            [](RunConfig& c, std::string_view v) {
              c.teacher.backoff_base = Seconds(parse_double("generation.backoff_base_s", v));
            }},
      Field{"generation.jitter", [](const RunConfig& c) { return ordered_json(c.teacher.jitter); },
            [](RunConfig& c, std::string_view v) {
              c.teacher.jitter = parse_bool("generation.jitter", v);
            }},
      CLIQ_SIZE_FIELD("generation.max_concurrency", teacher.max_concurrency),
      CLIQ_STRING_FIELD("generation.api_key_env", teacher_api_key_env),
      CLIQ_SIZE_FIELD("generation.examples_per_cluster", examples_per_cluster),
      CLIQ_SIZE_FIELD("generation.queries_per_cluster", queries_per_cluster),

      Field{"analysis.budgets", [](const RunConfig& c) { return ordered_json(c.analysis_budgets); },
            [](RunConfig& c, std::string_view v) {
              c.analysis_budgets = parse_size_list("analysis.budgets", v);
            }},
      CLIQ_SIZE_FIELD("analysis.trials", analysis_trials),
      CLIQ_SIZE_FIELD("analysis.redundancy_exact_threshold", redundancy_exact_threshold),
      CLIQ_SIZE_FIELD("analysis.redundancy_sample_pairs", redundancy_sample_pairs),

      CLIQ_SIZE_FIELD("simulation.k_true", sim_world.k_true),
      CLIQ_SIZE_FIELD("simulation.dim", sim_world.dim),
      CLIQ_SIZE_FIELD("simulation.pool_size", sim_world.pool_size),
      CLIQ_DOUBLE_FIELD("simulation.zipf_s", sim_world.zipf_s),
      CLIQ_DOUBLE_FIELD("simulation.jitter", sim_world.jitter),
      CLIQ_SIZE_FIELD("simulation.probes_per_cluster", sim_world.probes_per_cluster),
      CLIQ_DOUBLE_FIELD("simulation.noise_sigma", sim_noise_sigma),
      CLIQ_DOUBLE_FIELD("simulation.quant_step", sim_quant_step),
      Field{"simulation.strategies",
            [](const RunConfig& c) {
              ordered_json arr = ordered_json::array();
              for (auto s : c.sim_strategies) arr.push_back(sim::to_string(s));
              return arr;
            },
            [](RunConfig& c, std::string_view v) {
              c.sim_strategies.clear();
              for (const auto& s : split_list(v)) {
                c.sim_strategies.push_back(sim::parse_extraction_strategy(s));
              }
            }},
      Field{"simulation.budgets", [](const RunConfig& c) { return ordered_json(c.sim_budgets); },
            [](RunConfig& c, std::string_view v) {
              c.sim_budgets = parse_size_list("simulation.budgets", v);
            }},
      CLIQ_SIZE_FIELD("simulation.m_per_cluster", sim_m_per_cluster),
      CLIQ_SIZE_FIELD("simulation.trials", sim_trials),
  };
  return table;
}

#undef CLIQ_SIZE_FIELD
#undef CLIQ_DOUBLE_FIELD
#undef CLIQ_STRING_FIELD

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw InputError("config", "unknown config key \"" + std::string(key) + "\"");
}

}  // namespace

ordered_json RunConfig::to_json() const {
  ordered_json j;
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  j["simulation.seed"] = stage_seed("simulate");
  j["embedding.seed"] = stage_seed("embed");
  return j;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  field(key).set(config, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string expand_env(std::string_view value) {
  std::string out;
  for (std::size_t i = 0; i < value.size();) {
    if (value.substr(i, 2) == "${") {
      const auto close = value.find('}', i + 2);
      if (close != std::string_view::npos) {
        const std::string name(value.substr(i + 2, close - i - 2));
        if (const char* v = std::getenv(name.c_str())) out += v;
        i = close + 1;
        continue;
      }
    }
    out += value[i++];
  }
  return out;
}

void apply_config_yaml(RunConfig& config, std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw InputError("config", std::string("malformed config file: ") + e.what());
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) throw InputError("config", "config file must be a mapping of keys");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node& node = kv.second;
    std::string value;
    if (node.IsSequence()) {
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (i) value += ',';
        value += node[i].as<std::string>();
      }
    } else if (node.IsScalar()) {
      value = node.as<std::string>();
    } else if (node.IsNull()) {
      continue;
    } else {
      throw InputError("config", "config key \"" + key + "\" must be a scalar or a list");
    }
    set_config_value(config, key, expand_env(value));
  }
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig config;
  apply_config_yaml(config, buf.str());
  return config;
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw InputError("config", "override \"" + o + "\" is not key=value");
    }
    set_config_value(config, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

}  // namespace cliq

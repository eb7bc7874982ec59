// cliq: command-line driver for the clustered instruction-query pipeline.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cliq/config.hpp"
#include "cliq/error.hpp"
#include "cliq/pipeline.hpp"
#include "cliq/textmetrics.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string artifact_dir;
  std::string dataset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> clusters;
  std::optional<std::size_t> min_size;
  std::string teacher_backend;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "YAML config file (flat dotted keys)");
  cmd->add_option("-a,--artifact-dir", o.artifact_dir, "Artifact directory");
  cmd->add_option("-d,--dataset", o.dataset, "Instruction dataset (JSON array)");
  cmd->add_option("-s,--set", o.overrides, "Override a config key: key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("-k,--clusters", o.clusters, "Number of clusters K");
  cmd->add_option("--min-size", o.min_size, "Minimum retained cluster size");
  cmd->add_option("--teacher", o.teacher_backend, "Teacher backend: api or mock")
      ->check(CLI::IsMember({"api", "mock"}));
  cmd->add_flag("-q,--quiet", o.quiet, "Suppress progress logging");
}

cliq::RunConfig resolve(const CommonOptions& o) {
  cliq::RunConfig config = o.config_path.empty() ? cliq::RunConfig{}
                                                 : cliq::load_config_file(o.config_path);
  cliq::apply_overrides(config, o.overrides);
  if (!o.artifact_dir.empty()) config.artifact_dir = o.artifact_dir;
  if (!o.dataset.empty()) config.dataset_path = o.dataset;
  if (o.seed) config.seed = *o.seed;
  if (o.clusters) config.clustering.k = *o.clusters;
  if (o.min_size) config.clustering.min_cluster_size = *o.min_size;
  if (!o.teacher_backend.empty()) {
    cliq::set_config_value(config, "generation.backend", o.teacher_backend);
  }
  return config;
}

int error_exit(const cliq::Error& e, int code) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", e.kind()}, {"message", e.what()}, {"exit_code", code}};
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cliq: clustered instruction querying, coverage analytics and extraction simulation"};
  app.require_subcommand(1);

  CommonOptions common;
  std::vector<std::pair<std::string, CLI::App*>> stages;
  const std::vector<std::pair<std::string, std::string>> descriptions = {
      {"ingest", "Build pool.jsonl from an instruction dataset"},
      {"embed", "Embed the query pool"},
      {"cluster", "Mini-batch k-means, small-cluster filtering and re-indexing"},
      {"generate", "Cluster-conditioned query generation against the teacher API"},
      {"analyze", "Hit-rate, redundancy, centroid-distance, allocation and projection metrics"},
      {"simulate", "Budgeted extraction simulation against a quantized teacher"},
      {"pipeline", "Run every stage in order"},
  };
  for (const auto& [name, desc] : descriptions) {
    auto* cmd = app.add_subcommand(name, desc);
    add_common(cmd, common);
    stages.emplace_back(name, cmd);
  }

  std::string score_input, score_output;
  bool percent = false;
  auto* score = app.add_subcommand("score", "BLEU / ROUGE for JSONL {candidate, reference} pairs");
  score->add_option("-i,--input", score_input, "JSONL input")->required();
  score->add_option("-o,--output", score_output, "CSV output (default: stdout)");
  score->add_flag("--percent", percent, "Report scores as percentages");

  bool print_config = false;
  auto* show = app.add_subcommand("config", "Print the resolved configuration as JSON");
  add_common(show, common);
  show->add_flag("--keys", print_config, "List the accepted config keys instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (score->parsed()) {
      std::ifstream in(score_input);
      if (!in) throw cliq::MissingArtifactError(score_input);
      if (score_output.empty()) {
        cliq::metrics::score_jsonl(in, std::cout, percent);
      } else {
        std::ofstream out(score_output, std::ios::binary | std::ios::trunc);
        if (!out) throw cliq::InputError("io", "cannot write " + score_output);
        cliq::metrics::score_jsonl(in, out, percent);
      }
      return 0;
    }
    if (show->parsed()) {
      if (print_config) {
        for (const auto& k : cliq::config_keys()) std::cout << k << '\n';
      } else {
        std::cout << resolve(common).to_json().dump(2) << '\n';
      }
      return 0;
    }
    for (const auto& [name, cmd] : stages) {
      if (!cmd->parsed()) continue;
      const auto config = resolve(common);
      cliq::CommandContext ctx;
      if (!common.quiet) ctx.log = &std::clog;
      return cliq::run_command(name, config, ctx, std::cerr);
    }
  } catch (const cliq::InputError& e) {
    return error_exit(e, 1);
  } catch (const cliq::Error& e) {
    return error_exit(e, 2);
  }
  return 1;
}

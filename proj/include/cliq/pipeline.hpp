#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cliq/cluster.hpp"
#include "cliq/config.hpp"
#include "cliq/corpus.hpp"
#include "cliq/error.hpp"
#include "cliq/genquery.hpp"
#include "cliq/http.hpp"

namespace cliq {

// Stage-addressed artifact files under one directory.
struct ArtifactLayout {
  std::filesystem::path dir;

  std::filesystem::path pool() const { return dir / "pool.jsonl"; }
  std::filesystem::path embeddings() const { return dir / "embeddings.bin"; }
  std::filesystem::path clustering() const { return dir / "clustering.json"; }
  std::filesystem::path centroids() const { return dir / "centroids.bin"; }
  std::filesystem::path assignments() const { return dir / "assignments.csv"; }
  std::filesystem::path generated() const { return dir / "generated.jsonl"; }
  std::filesystem::path generation_report() const { return dir / "generation_report.json"; }
  std::filesystem::path generated_embeddings() const { return dir / "generated_embeddings.bin"; }
  std::filesystem::path metrics_dir() const { return dir / "metrics"; }
  std::filesystem::path fidelity() const { return dir / "fidelity.csv"; }
  std::filesystem::path simulation_report() const { return dir / "simulation.json"; }
  std::filesystem::path resolved_config() const { return dir / "resolved_config.json"; }
  std::filesystem::path lock() const { return dir / ".cliq.lock"; }
};

// Collaborators a command may need. Null transports are created from the
// config (HTTP endpoints, or the mock teacher for generation.backend=mock).
struct CommandContext {
  HttpTransport* teacher_transport = nullptr;
  HttpTransport* embedding_transport = nullptr;
  Sleeper sleep = real_sleeper();
  std::ostream* log = nullptr;
};

// Some clusters failed during generation; artifacts were still written.
class PartialGenerationError : public UpstreamError {
 public:
  PartialGenerationError(const std::string& message, std::size_t failed)
      : UpstreamError(message), failed_(failed) {}
  std::size_t failed_clusters() const noexcept { return failed_; }

 private:
  std::size_t failed_;
};

void cmd_ingest(const RunConfig& config, CommandContext& ctx);
void cmd_embed(const RunConfig& config, CommandContext& ctx);
void cmd_cluster(const RunConfig& config, CommandContext& ctx);
GenerationReport cmd_generate(const RunConfig& config, CommandContext& ctx);
void cmd_analyze(const RunConfig& config, CommandContext& ctx);
void cmd_simulate(const RunConfig& config, CommandContext& ctx);
void cmd_pipeline(const RunConfig& config, CommandContext& ctx);

// Rebuilds the retained clustering from pool.jsonl, clustering.json and
// assignments.csv.
RetainedClustering load_retained_clustering(const ArtifactLayout& layout, const QueryPool& pool);

// Runs one named command ("ingest", ..., "pipeline"), converting failures
// into an exit code (0 ok, 1 user error, 2 upstream failure) and a one-line
// JSON error record on `err`.
int run_command(std::string_view name, const RunConfig& config, CommandContext& ctx,
                std::ostream& err);

inline const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names = {
      "ingest", "embed", "cluster", "generate", "analyze", "simulate", "pipeline"};
  return names;
}

}  // namespace cliq

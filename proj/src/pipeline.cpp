#include "cliq/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cliq/analyze.hpp"
#include "cliq/embed.hpp"
#include "cliq/extractsim.hpp"
#include "cliq/mock_teacher.hpp"
#include "cliq/random.hpp"

namespace cliq {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Advisory exclusive lock on the artifact directory for one command.
class ArtifactLock {
 public:
  explicit ArtifactLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw InputError("io", "cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw InputError("locked", "artifact directory is in use by another command: " +
                                     path.parent_path().string());
    }
  }
  ~ArtifactLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  ArtifactLock(const ArtifactLock&) = delete;
  ArtifactLock& operator=(const ArtifactLock&) = delete;

 private:
  int fd_ = -1;
};

// Shortest round-trip representation; stable across runs.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifactError(p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("io", "cannot write " + p.string());
  out << text;
}

void write_json(const fs::path& p, const ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

json read_json(const fs::path& p) {
  require(p);
  std::ifstream in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("artifact", p.string() + ": " + e.what());
  }
}

void log(CommandContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n';
}

ArtifactLayout layout_for(const RunConfig& config) { return ArtifactLayout{config.artifact_dir}; }

void write_resolved_config(const RunConfig& config) {
  write_json(layout_for(config).resolved_config(), config.to_json());
}

std::unique_ptr<HttpTransport> make_teacher_transport(const RunConfig& config) {
  if (config.teacher_backend == TeacherBackend::kMock) {
    return std::make_unique<MockTeacherTransport>();
  }
  return std::make_unique<HttplibTransport>(config.teacher.base_url,
                                            api_key_from_env(config.teacher_api_key_env),
                                            config.teacher.timeout);
}

Matrix embed_with_config(const RunConfig& config, CommandContext& ctx,
                         const std::vector<std::string>& texts) {
  const auto ecfg = config.resolved_embedding();
  std::unique_ptr<HttpTransport> owned;
  HttpTransport* transport = ctx.embedding_transport;
  if (ecfg.kind == EmbeddingBackendKind::kRemoteApi && transport == nullptr) {
    owned = std::make_unique<HttplibTransport>(
        ecfg.base_url, api_key_from_env(config.embedding_api_key_env), config.teacher.timeout);
    transport = owned.get();
  }
  std::vector<std::string> warnings;
  Matrix m = embed_texts(texts, ecfg, transport, ctx.sleep, &warnings);
  for (const auto& w : warnings) log(ctx, "[embed] warning: " + w);
  return m;
}

std::vector<std::size_t> default_budgets(std::size_t n, std::size_t k) {
  std::set<std::size_t> out;
  for (std::size_t base = 1; base <= n; base *= 10) {
    for (std::size_t f : {1, 2, 5}) {
      if (base * f <= n) out.insert(base * f);
    }
    if (base > n / 10) break;
  }
  if (k <= n) out.insert(k);
  return {out.begin(), out.end()};
}

void write_csv(const fs::path& p, const std::string& header,
               const std::vector<std::string>& rows) {
  std::string text = header + "\n";
  for (const auto& r : rows) text += r + "\n";
  write_text(p, text);
}

}  // namespace

void cmd_ingest(const RunConfig& config, CommandContext& ctx) {
  if (config.dataset_path.empty()) throw InputError("config", "dataset_path is not set");
  const auto layout = layout_for(config);
  const auto records = load_instruction_dataset_file(config.dataset_path);
  const auto pool = build_query_pool(records);
  write_pool_jsonl(layout.pool(), pool);
  write_resolved_config(config);
  log(ctx, "[ingest] " + std::to_string(pool.size()) + " queries");
}

void cmd_embed(const RunConfig& config, CommandContext& ctx) {
  const auto layout = layout_for(config);
  require(layout.pool());
  const auto pool = read_pool_jsonl(layout.pool());
  const auto X = embed_with_config(config, ctx, pool.texts());
  const auto ecfg = config.resolved_embedding();
  save_matrix(layout.embeddings(), X,
              MatrixMeta{X.rows(), X.cols(), ecfg.seed, std::string(to_string(ecfg.kind))});
  write_resolved_config(config);
  log(ctx, "[embed] " + std::to_string(X.rows()) + " x " + std::to_string(X.cols()));
}

void cmd_cluster(const RunConfig& config, CommandContext& ctx) {
  const auto layout = layout_for(config);
  require(layout.pool());
  require(layout.embeddings());
  const auto pool = read_pool_jsonl(layout.pool());
  MatrixMeta meta;
  const Matrix X = load_matrix(layout.embeddings(), &meta);
  if (X.rows() != pool.size()) {
    throw InputError("misaligned", "embeddings have " + std::to_string(X.rows()) +
                                       " rows but the pool has " + std::to_string(pool.size()));
  }
  const auto cc = config.resolved_clustering();
  const auto model = minibatch_kmeans(X, cc);
  const auto retained = filter_small_clusters(model, pool, cc.min_cluster_size);

  ordered_json j;
  j["config"] = {{"k", cc.k},
                 {"seed", cc.seed},
                 {"minibatch_size", model.minibatch_size},
                 {"max_iterations", cc.max_iterations},
                 {"min_cluster_size", cc.min_cluster_size},
                 {"tolerance", cc.tolerance}};
  j["n"] = X.rows();
  j["dim"] = X.cols();
  j["iterations_run"] = model.iterations_run;
  j["inertia"] = model.inertia;
  j["sizes"] = model.sizes;
  ordered_json old_to_new = ordered_json::array();
  for (const auto& v : retained.old_to_new) old_to_new.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
  j["retained"] = {{"k", retained.retained_k},
                   {"min_size", retained.min_size},
                   {"old_to_new", old_to_new},
                   {"new_to_old", retained.new_to_old},
                   {"sizes", retained.sizes},
                   {"dropped_queries", retained.dropped_queries}};
  write_json(layout.clustering(), j);
  save_matrix(layout.centroids(), model.centroids,
              MatrixMeta{model.centroids.rows(), model.centroids.cols(), cc.seed, "minibatch_kmeans"});

  std::vector<std::string> rows;
  for (std::size_t i = 0; i < retained.query_ids.size(); ++i) {
    rows.push_back(std::to_string(pool[retained.query_ids[i]].id) + "," +
                   std::to_string(retained.assignments[i]));
  }
  write_csv(layout.assignments(), "query_id,cluster_id", rows);
  write_resolved_config(config);
  log(ctx, "[cluster] K=" + std::to_string(cc.k) + " retained=" +
               std::to_string(retained.retained_k) + " dropped_queries=" +
               std::to_string(retained.dropped_queries));
}

RetainedClustering load_retained_clustering(const ArtifactLayout& layout, const QueryPool& pool) {
  const json j = read_json(layout.clustering());
  require(layout.assignments());
  RetainedClustering r;
  try {
    const auto& ret = j.at("retained");
    r.min_size = ret.at("min_size").get<std::size_t>();
    r.retained_k = ret.at("k").get<std::size_t>();
    r.original_k = ret.at("old_to_new").size();
    for (const auto& v : ret.at("old_to_new")) {
      r.old_to_new.push_back(v.is_null() ? std::nullopt : std::optional<int>(v.get<int>()));
    }
    r.new_to_old = ret.at("new_to_old").get<std::vector<int>>();
    r.sizes = ret.at("sizes").get<std::vector<std::size_t>>();
    r.dropped_queries = ret.at("dropped_queries").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InputError("artifact", layout.clustering().string() + ": " + e.what());
  }

  std::vector<std::optional<std::size_t>> position_of_id;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].id >= position_of_id.size()) position_of_id.resize(pool[i].id + 1);
    position_of_id[pool[i].id] = i;
  }
  std::ifstream in(layout.assignments());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::size_t id = 0;
    int cluster = 0;
    const auto r1 = std::from_chars(line.data(), line.data() + comma, id);
    const auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), cluster);
    if (comma == std::string::npos || r1.ec != std::errc{} || r2.ec != std::errc{} ||
        id >= position_of_id.size() || !position_of_id[id] || cluster < 0 ||
        static_cast<std::size_t>(cluster) >= r.retained_k) {
      throw InputError("artifact", layout.assignments().string() + ": bad row \"" + line + "\"");
    }
    const std::size_t pos = *position_of_id[id];
    r.query_ids.push_back(pos);
    r.assignments.push_back(cluster);
    Query q = pool[pos];
    q.cluster_id = cluster;
    r.pool.push_back(std::move(q));
  }
  return r;
}

GenerationReport cmd_generate(const RunConfig& config, CommandContext& ctx) {
  const auto layout = layout_for(config);
  require(layout.pool());
  require(layout.clustering());
  require(layout.assignments());
  const auto pool = read_pool_jsonl(layout.pool());
  const auto retained = load_retained_clustering(layout, pool);

  std::unique_ptr<HttpTransport> owned;
  HttpTransport* transport = ctx.teacher_transport;
  if (transport == nullptr) {
    owned = make_teacher_transport(config);
    transport = owned.get();
  }
  GenerationParams params;
  params.examples_per_cluster = config.examples_per_cluster;
  params.queries_per_cluster = config.queries_per_cluster;
  params.seed = config.stage_seed("generate");
  params.deterministic_backend = config.teacher_backend == TeacherBackend::kMock;

  GenerationResult result;
  try {
    result = generate_query_set(retained, config.teacher, params, *transport, ctx.sleep);
  } catch (const GenerationFailedError& e) {
    write_json(layout.generation_report(), e.report().to_json());
    throw;
  }
  write_generated_jsonl(layout.generated(), result.queries);
  write_json(layout.generation_report(), result.report.to_json());
  write_resolved_config(config);
  log(ctx, "[generate] kept " + std::to_string(result.report.total_kept()) + " queries from " +
               std::to_string(result.report.clusters.size()) + " clusters");
  if (const auto failed = result.report.failed_clusters(); failed > 0) {
    throw PartialGenerationError(std::to_string(failed) + " of " +
                                     std::to_string(result.report.clusters.size()) +
                                     " clusters failed; see " +
                                     layout.generation_report().string(),
                                 failed);
  }
  return result.report;
}

void cmd_analyze(const RunConfig& config, CommandContext& ctx) {
  const auto layout = layout_for(config);
  require(layout.pool());
  require(layout.embeddings());
  require(layout.clustering());
  require(layout.centroids());
  require(layout.assignments());
  const auto pool = read_pool_jsonl(layout.pool());
  const auto retained = load_retained_clustering(layout, pool);
  const Matrix X_all = load_matrix(layout.embeddings());
  const Matrix centroids_all = load_matrix(layout.centroids());
  const Matrix X = select_rows(X_all, retained.query_ids);
  Matrix centroids(retained.retained_k, centroids_all.cols());
  for (std::size_t c = 0; c < retained.retained_k; ++c) {
    const auto src = centroids_all.row(static_cast<std::size_t>(retained.new_to_old[c]));
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
  }

  const bool have_generated = fs::exists(layout.generated());
  QueryPool generated;
  Matrix G;
  std::vector<int> gen_labels;
  if (have_generated) {
    generated = read_generated_jsonl(layout.generated());
    if (!generated.empty()) {
      G = embed_with_config(config, ctx, generated.texts());
      const auto ecfg = config.resolved_embedding();
      save_matrix(layout.generated_embeddings(), G,
                  MatrixMeta{G.rows(), G.cols(), ecfg.seed, std::string(to_string(ecfg.kind))});
      for (const auto& q : generated) gen_labels.push_back(q.cluster_id.value_or(-1));
    }
  } else {
    log(ctx, "[analyze] no generated.jsonl; reporting original-pool metrics only");
  }

  const auto seed = config.stage_seed("analyze");
  const auto metrics = layout.metrics_dir();
  fs::create_directories(metrics);
  ordered_json bundle;
  bundle["retained_clusters"] = retained.retained_k;
  bundle["original_queries"] = retained.pool.size();
  bundle["generated_queries"] = generated.size();

  // Hit rate.
  auto budgets = config.analysis_budgets.empty()
                     ? default_budgets(retained.assignments.size(), retained.retained_k)
                     : config.analysis_budgets;
  for (auto strategy : {SelectionStrategy::kRandomUniform, SelectionStrategy::kCliqRoundRobin}) {
    const auto curve =
        hit_rate_curve(retained.assignments, strategy, budgets, config.analysis_trials, seed);
    std::vector<std::string> rows;
    ordered_json jc = ordered_json::array();
    for (std::size_t b = 0; b < curve.budgets.size(); ++b) {
      rows.push_back(std::to_string(curve.budgets[b]) + "," + num(curve.mean_covered[b]) + "," +
                     num(curve.std_covered[b]));
      jc.push_back({{"budget", curve.budgets[b]},
                    {"mean_covered", curve.mean_covered[b]},
                    {"std_covered", curve.std_covered[b]}});
    }
    const std::string name(to_string(strategy));
    write_csv(metrics / ("hit_rate_" + name + ".csv"), "budget,mean_covered,std_covered", rows);
    bundle["hit_rate"][name] = {{"total_clusters", curve.total_clusters},
                                {"trials", strategy == SelectionStrategy::kCliqRoundRobin
                                               ? std::size_t{1}
                                               : config.analysis_trials},
                                {"curve", jc}};
  }

  // Redundancy and centroid distances.
  RedundancyOptions ropt{config.redundancy_exact_threshold, config.redundancy_sample_pairs, seed};
  auto redundancy_block = [&](const Matrix& M, const std::vector<int>& labels,
                              const std::string& tag) {
    const auto rep = intra_cluster_redundancy(M, labels, ropt);
    std::vector<std::string> rows;
    for (const auto& [c, v] : rep.per_cluster) rows.push_back(std::to_string(c) + "," + num(v));
    write_csv(metrics / ("redundancy_" + tag + ".csv"), "cluster_id,redundancy", rows);
    bundle["redundancy"][tag] = {
        {"pooled_mean", rep.pooled_mean ? ordered_json(*rep.pooled_mean) : ordered_json(nullptr)},
        {"clusters", rep.per_cluster.size()},
        {"excluded", rep.excluded}};

    const auto dist = centroid_distance_distribution(M, labels, centroids);
    std::vector<std::string> drows;
    double sum = 0.0;
    for (const auto& d : dist.distances) {
      drows.push_back(std::to_string(d.cluster_id) + "," + num(d.distance));
      sum += d.distance;
    }
    write_csv(metrics / ("centroid_distance_" + tag + ".csv"), "cluster_id,distance", drows);
    bundle["centroid_distance"][tag] = {
        {"mean", dist.distances.empty() ? 0.0 : sum / static_cast<double>(dist.distances.size())},
        {"skipped", dist.skipped.size()}};
  };
  redundancy_block(X, retained.assignments, "original");
  if (!gen_labels.empty()) redundancy_block(G, gen_labels, "generated");

  // Allocation: the generated set versus an equally sized uniform draw from
  // the original pool.
  auto allocation_block = [&](const std::vector<int>& labels, const std::string& tag) {
    const auto h = allocation_histogram(labels, retained.retained_k);
    std::vector<std::string> rows;
    for (const auto& [c, n] : h.counts) rows.push_back(std::to_string(c) + "," + std::to_string(n));
    write_csv(metrics / ("allocation_" + tag + ".csv"), "cluster_id,count", rows);
    bundle["allocation"][tag] = {{"total", h.total}, {"cv", h.coefficient_of_variation}};
  };
  if (!gen_labels.empty()) {
    allocation_block(gen_labels, "generated");
    Rng rng(derive_seed(seed, "allocation"));
    const auto pick = rng.sample_without_replacement(
        retained.assignments.size(), std::min(gen_labels.size(), retained.assignments.size()));
    std::vector<int> random_labels;
    for (std::size_t i : pick) random_labels.push_back(retained.assignments[i]);
    std::sort(random_labels.begin(), random_labels.end());
    allocation_block(random_labels, "random_uniform");
  }

  // 2-D projection of originals and generated queries together.
  Matrix both(X.rows() + G.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    std::copy(X.row(i).begin(), X.row(i).end(), both.row(i).begin());
  }
  for (std::size_t i = 0; i < G.rows(); ++i) {
    std::copy(G.row(i).begin(), G.row(i).end(), both.row(X.rows() + i).begin());
  }
  if (both.rows() >= 3) {
    const auto proj = pca_project_2d(both, seed);
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < both.rows(); ++i) {
      const bool orig = i < X.rows();
      const auto& q = orig ? retained.pool[i] : generated[i - X.rows()];
      rows.push_back(std::to_string(q.id) + "," + num(proj.coords(i, 0)) + "," +
                     num(proj.coords(i, 1)) + "," +
                     (q.cluster_id ? std::to_string(*q.cluster_id) : std::string{}) + "," +
                     std::string(to_string(q.source)));
    }
    write_csv(metrics / "projection.csv", "query_id,x,y,cluster_id,source", rows);
    bundle["projection"] = {{"method", "pca_power_iteration"},
                            {"variances", {proj.variances[0], proj.variances[1]}},
                            {"rank_deficient", proj.rank_deficient}};
  }

  write_json(metrics / "metrics.json", bundle);
  write_resolved_config(config);
  log(ctx, "[analyze] wrote " + metrics.string());
}

void cmd_simulate(const RunConfig& config, CommandContext& ctx) {
  const auto layout = layout_for(config);
  sim::WorldParams wp = config.sim_world;
  wp.seed = config.stage_seed("simulate");
  const auto world = sim::make_world(wp);
  const sim::QuantizedTeacher teacher{&world, config.sim_noise_sigma, config.sim_quant_step};
  sim::ExperimentConfig ec;
  ec.strategies = config.sim_strategies;
  ec.budgets = config.sim_budgets;
  ec.m_per_cluster = config.sim_m_per_cluster;
  ec.trials = config.sim_trials;
  ec.seed = wp.seed;
  const auto table = sim::run_budget_experiment(world, teacher, ec);
  table.write_csv(layout.fidelity());

  ordered_json j;
  j["world"] = {{"k_true", wp.k_true},
                {"dim", wp.dim},
                {"pool_size", wp.pool_size},
                {"zipf_s", wp.zipf_s},
                {"jitter", wp.jitter},
                {"seed", wp.seed},
                {"max_pairwise_cosine", world.max_pairwise_cosine},
                {"cluster_mass", world.cluster_mass}};
  j["teacher"] = {{"noise_sigma", teacher.noise_sigma}, {"quant_step", teacher.quant_step}};
  ordered_json mm = ordered_json::array();
  for (const auto& m : table.mismatches) {
    mm.push_back({{"strategy", "cliq_uniform"},
                  {"budget", m.budget},
                  {"trial", m.trial},
                  {"retained_k", m.retained_k},
                  {"m_per_cluster", m.m_per_cluster}});
  }
  j["budget_mismatches"] = mm;
  ordered_json sf = ordered_json::array();
  for (const auto& f : table.shortfalls) {
    sf.push_back({{"strategy", "cliq_uniform"},
                  {"budget", f.budget},
                  {"trial", f.trial},
                  {"queries_used", f.used}});
  }
  j["budget_shortfalls"] = sf;
  write_json(layout.simulation_report(), j);
  write_resolved_config(config);
  log(ctx, "[simulate] wrote " + layout.fidelity().string() + " (" +
               std::to_string(table.mismatches.size()) + " budget mismatches)");
}

void cmd_pipeline(const RunConfig& config, CommandContext& ctx) {
  cmd_ingest(config, ctx);
  cmd_embed(config, ctx);
  cmd_cluster(config, ctx);
  cmd_generate(config, ctx);
  cmd_analyze(config, ctx);
  cmd_simulate(config, ctx);
}

int run_command(std::string_view name, const RunConfig& config, CommandContext& ctx,
                std::ostream& err) {
  auto record = [&](const Error& e, int code, const std::string& missing = {}) {
    ordered_json j;
    j["error"] = {{"command", name}, {"kind", e.kind()}, {"message", e.what()}, {"exit_code", code}};
    if (!missing.empty()) j["error"]["missing"] = missing;
    err << j.dump() << '\n';
    return code;
  };
  try {
    config.validate();
    fs::create_directories(config.artifact_dir);
    ArtifactLock lock(layout_for(config).lock());
    if (name == "ingest") {
      cmd_ingest(config, ctx);
    } else if (name == "embed") {
      cmd_embed(config, ctx);
    } else if (name == "cluster") {
      cmd_cluster(config, ctx);
    } else if (name == "generate") {
      cmd_generate(config, ctx);
    } else if (name == "analyze") {
      cmd_analyze(config, ctx);
    } else if (name == "simulate") {
      cmd_simulate(config, ctx);
    } else if (name == "pipeline") {
      cmd_pipeline(config, ctx);
    } else {
      throw InputError("usage", "unknown command \"" + std::string(name) + "\"");
    }
    return 0;
  } catch (const MissingArtifactError& e) {
    return record(e, 1, e.path());
  } catch (const InputError& e) {
    return record(e, 1);
  } catch (const UpstreamError& e) {
    return record(e, 2);
  } catch (const Error& e) {
    return record(e, 2);
  } catch (const fs::filesystem_error& e) {
    return record(InputError("io", e.what()), 1);
  }
}

}  // namespace cliq

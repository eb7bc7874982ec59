#include "cliq/extractsim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "cliq/embed.hpp"
#include "cliq/error.hpp"
#include "cliq/random.hpp"

namespace cliq::sim {

std::vector<double> zipf_masses(std::size_t count, double s) {
  std::vector<double> mass(count);
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    mass[k] = std::pow(static_cast<double>(k + 1), -s);
    total += mass[k];
  }
  for (double& m : mass) m /= total;
  return mass;
}

std::vector<std::size_t> stratified_counts(std::span<const double> mass, std::size_t total) {
  if (mass.empty()) return {};
  std::vector<std::size_t> counts(mass.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    const double exact = mass[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(-(exact - std::floor(exact)), k);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) {
    ++counts[remainders[r % remainders.size()].second];
  }
  // Every cluster keeps at least one member, taken from the largest.
  for (auto& c : counts) {
    if (c > 0) continue;
    auto largest = std::max_element(counts.begin(), counts.end());
    if (*largest <= 1) break;
    --*largest;
    c = 1;
  }
  return counts;
}

namespace {

void random_unit(Rng& rng, std::span<double> out) {
  for (double& x : out) x = rng.normal();
  normalize_or_e1(out);
}

void jittered(Rng& rng, std::span<const double> center, double scale, std::span<double> out) {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = center[j] + scale * rng.normal();
  normalize_or_e1(out);
}

}  // namespace

SimWorld make_world(const WorldParams& params) {
  if (params.k_true < 2) throw InputError("config", "k_true must be >= 2");
  if (params.dim < 2) throw InputError("config", "dim must be >= 2");
  if (params.pool_size < params.k_true) {
    throw InputError("config", "pool_size must be >= k_true");
  }
  SimWorld w;
  w.params = params;
  w.cluster_mass = zipf_masses(params.k_true, params.zipf_s);

  Rng proto_rng(derive_seed(params.seed, "prototypes"));
  w.prototypes = Matrix(params.k_true, params.dim);
  std::vector<double> candidate(params.dim);
  for (std::size_t k = 0; k < params.k_true; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      random_unit(proto_rng, candidate);
      double worst = -1.0;
      for (std::size_t p = 0; p < k; ++p) {
        worst = std::max(worst, dot(candidate, w.prototypes.row(p)));
      }
      if (worst < params.max_prototype_cosine) {
        std::copy(candidate.begin(), candidate.end(), w.prototypes.row(k).begin());
        w.max_pairwise_cosine = std::max(w.max_pairwise_cosine, worst);
        placed = true;
      }
    }
    if (!placed) {
      throw InputError("separation", "cannot place prototype " + std::to_string(k) +
                                         " with cosine < " +
                                         std::to_string(params.max_prototype_cosine) + " in dim " +
                                         std::to_string(params.dim));
    }
  }

  Rng pool_rng(derive_seed(params.seed, "pool"));
  w.pool = Matrix(params.pool_size, params.dim);
  w.labels.resize(params.pool_size);
  const auto counts = stratified_counts(w.cluster_mass, params.pool_size);
  std::vector<int> ordered;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    ordered.insert(ordered.end(), counts[k], static_cast<int>(k));
  }
  const auto order = pool_rng.permutation(params.pool_size);
  for (std::size_t i = 0; i < params.pool_size; ++i) {
    const auto k = static_cast<std::size_t>(ordered[order[i]]);
    w.labels[i] = static_cast<int>(k);
    jittered(pool_rng, w.prototypes.row(k), params.jitter, w.pool.row(i));
  }

  Rng probe_rng(derive_seed(params.seed, "probes"));
  const std::size_t per = params.probes_per_cluster + 1;
  w.probes = Matrix(params.k_true * per, params.dim);
  for (std::size_t k = 0; k < params.k_true; ++k) {
    const auto proto = w.prototypes.row(k);
    std::copy(proto.begin(), proto.end(), w.probes.row(k * per).begin());
    w.probe_labels.push_back(static_cast<int>(k));
    for (std::size_t p = 1; p < per; ++p) {
      jittered(probe_rng, proto, params.jitter, w.probes.row(k * per + p));
      w.probe_labels.push_back(static_cast<int>(k));
    }
  }
  return w;
}

int nearest_prototype(const SimWorld& world, std::span<const double> x) {
  int best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < world.prototypes.rows(); ++k) {
    const double s = dot(x, world.prototypes.row(k));
    if (s > best_sim) {
      best_sim = s;
      best = static_cast<int>(k);
    }
  }
  return best;
}

double quantize(double value, double step) {
  if (step <= 0.0) return value;
  return std::round(value / step) * step;
}

std::vector<double> teacher_full(const SimWorld& world, std::span<const double> x) {
  const auto proto = world.prototypes.row(static_cast<std::size_t>(nearest_prototype(world, x)));
  return {proto.begin(), proto.end()};
}

std::vector<double> teacher_respond(const QuantizedTeacher& teacher, std::span<const double> x,
                                    std::uint64_t seed) {
  if (teacher.world == nullptr) throw InputError("config", "teacher has no world");
  auto response = teacher_full(*teacher.world, x);
  for (double& v : response) v = quantize(v, teacher.quant_step);
  if (teacher.noise_sigma > 0.0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : x) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
    }
    Rng rng(derive_seed(seed, h));
    for (double& v : response) v += teacher.noise_sigma * rng.normal();
  }
  return response;
}

void StudentModel::add(std::span<const double> query, std::span<const double> response) {
  if (query.size() != dim_ || response.size() != dim_) {
    throw InputError("dimension_mismatch", "student pair has the wrong dimension");
  }
  queries_.emplace_back(query.begin(), query.end());
  responses_.emplace_back(response.begin(), response.end());
}

std::vector<double> StudentModel::respond(std::span<const double> x) const {
  if (queries_.empty()) return std::vector<double>(dim_, 0.0);
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    const double s = dot(x, queries_[i]);
    if (s > best_sim) {
      best_sim = s;
      best = i;
    }
  }
  return responses_[best];
}

StudentModel train_student(std::size_t dim, const Matrix& queries, const Matrix& responses) {
  if (queries.rows() != responses.rows()) {
    throw InputError("misaligned", "train_student: query/response count mismatch");
  }
  StudentModel s(dim);
  for (std::size_t i = 0; i < queries.rows(); ++i) s.add(queries.row(i), responses.row(i));
  return s;
}

double kd_loss(const StudentModel& student, const Matrix& queries, const Matrix& targets) {
  if (queries.rows() != targets.rows()) {
    throw InputError("misaligned", "kd_loss: query/target count mismatch");
  }
  if (queries.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    total += squared_distance(student.respond(queries.row(i)), targets.row(i));
  }
  return total / static_cast<double>(queries.rows());
}

double fidelity(const StudentModel& student, const SimWorld& world, const Matrix& probes) {
  if (probes.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probes.rows(); ++i) {
    auto s = student.respond(probes.row(i));
    const auto t = teacher_full(world, probes.row(i));
    const double ns = norm(s);
    const double nt = norm(t);
    // A zero response has no direction; it scores 0.
    if (ns > 0.0 && nt > 0.0) total += std::clamp(dot(s, t) / (ns * nt), -1.0, 1.0);
  }
  return total / static_cast<double>(probes.rows());
}

std::string_view to_string(ExtractionStrategy s) {
  return s == ExtractionStrategy::kRandomUniform ? "random_uniform" : "cliq_uniform";
}

ExtractionStrategy parse_extraction_strategy(std::string_view name) {
  if (name == "random_uniform") return ExtractionStrategy::kRandomUniform;
  if (name == "cliq_uniform") return ExtractionStrategy::kCliqUniform;
  throw InputError("config", "unknown extraction strategy \"" + std::string(name) + "\"");
}

const FidelityRow* FidelityTable::find(ExtractionStrategy s, std::size_t budget) const {
  for (const auto& r : rows) {
    if (r.strategy == s && r.budget == budget) return &r;
  }
  return nullptr;
}

std::string FidelityTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "strategy,budget,noise_sigma,quant_step,mean_fidelity,std_fidelity,trials\n";
  for (const auto& r : rows) {
    out << to_string(r.strategy) << ',' << r.budget << ',' << r.noise_sigma << ','
        << r.quant_step << ',' << r.mean_fidelity << ',' << r.std_fidelity << ',' << r.trials
        << '\n';
  }
  return out.str();
}

void FidelityTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("io", "cannot write " + path.string());
  out << to_csv();
}

namespace {

double student_fidelity(const SimWorld& world, const QuantizedTeacher& teacher,
                        std::uint64_t teacher_seed, const std::vector<std::size_t>& chosen) {
  StudentModel student(world.params.dim);
  for (std::size_t idx : chosen) {
    const auto q = world.pool.row(idx);
    student.add(q, teacher_respond(teacher, q, teacher_seed));
  }
  return fidelity(student, world, world.probes);
}

// Up to m members nearest each retained centroid (ascending distance, then
// index); smaller clusters give all they have.
std::vector<std::size_t> nearest_to_centroids(const Matrix& X, const ClusterModel& model,
                                              const RetainedClustering& retained, std::size_t m) {
  std::vector<std::vector<std::pair<double, std::size_t>>> members(retained.retained_k);
  for (std::size_t i = 0; i < retained.query_ids.size(); ++i) {
    const auto c = static_cast<std::size_t>(retained.assignments[i]);
    const auto old = static_cast<std::size_t>(retained.new_to_old[c]);
    const auto q = retained.query_ids[i];
    members[c].emplace_back(squared_distance(X.row(q), model.centroids.row(old)), q);
  }
  std::vector<std::size_t> chosen;
  for (auto& list : members) {
    std::sort(list.begin(), list.end());
    for (std::size_t j = 0; j < std::min(m, list.size()); ++j) chosen.push_back(list[j].second);
  }
  return chosen;
}

void summarize(FidelityRow& row) {
  row.trials = row.per_trial.size();
  if (row.trials == 0) return;
  double sum = 0.0;
  for (double f : row.per_trial) sum += f;
  row.mean_fidelity = sum / static_cast<double>(row.trials);
  double ss = 0.0;
  for (double f : row.per_trial) ss += (f - row.mean_fidelity) * (f - row.mean_fidelity);
  row.std_fidelity = row.trials > 1 ? std::sqrt(ss / static_cast<double>(row.trials - 1)) : 0.0;
}

}  // namespace

FidelityTable run_budget_experiment(const SimWorld& world, const QuantizedTeacher& teacher,
                                    const ExperimentConfig& config) {
  if (config.trials < 1) throw InputError("config", "trials must be >= 1");
  const std::size_t n = world.pool.rows();
  for (std::size_t b : config.budgets) {
    if (b > n) {
      throw InputError("budget_exceeds_pool", "budget " + std::to_string(b) +
                                                  " exceeds pool size " + std::to_string(n));
    }
  }
  const std::uint64_t teacher_seed = derive_seed(config.seed, "teacher");

  FidelityTable table;
  for (auto strategy : config.strategies) {
    for (std::size_t b : config.budgets) {
      FidelityRow row;
      row.strategy = strategy;
      row.budget = b;
      row.noise_sigma = teacher.noise_sigma;
      row.quant_step = teacher.quant_step;
      table.rows.push_back(row);
    }
  }
  auto row_for = [&](ExtractionStrategy s, std::size_t b) -> FidelityRow& {
    for (auto& r : table.rows) {
      if (r.strategy == s && r.budget == b) return r;
    }
    throw std::logic_error("missing fidelity row");
  };

  const std::size_t max_budget =
      config.budgets.empty() ? 0 : *std::max_element(config.budgets.begin(), config.budgets.end());
  for (std::size_t t = 0; t < config.trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(config.seed, t);
    for (auto strategy : config.strategies) {
      if (strategy == ExtractionStrategy::kRandomUniform) {
        Rng rng(derive_seed(trial_seed, "random_uniform"));
        const auto order = rng.sample_without_replacement(n, max_budget);
        for (std::size_t b : config.budgets) {
          std::vector<std::size_t> chosen(order.begin(),
                                          order.begin() + static_cast<std::ptrdiff_t>(b));
          row_for(strategy, b).per_trial.push_back(
              student_fidelity(world, teacher, teacher_seed, chosen));
        }
        continue;
      }

      ClusteringConfig cc = config.clustering;
      if (cc.k == 0) cc.k = world.params.k_true;
      cc.seed = derive_seed(trial_seed, "cluster");
      const ClusterModel model = minibatch_kmeans(world.pool, cc);
      QueryPool stub;
      for (std::size_t i = 0; i < n; ++i) {
        Query q;
        q.id = i;
        stub.push_back(std::move(q));
      }

      std::optional<RetainedClustering> retained;
      try {
        retained = filter_small_clusters(model, stub, std::max<std::size_t>(cc.min_cluster_size, 1));
      } catch (const AllClustersDroppedError&) {
      }
      const std::size_t kept = retained ? retained->retained_k : 0;
      for (std::size_t b : config.budgets) {
        std::size_t m = config.m_per_cluster;
        if (m == 0 && kept > 0 && b % kept == 0) m = b / kept;
        if (m == 0 || kept * m != b) {
          table.mismatches.push_back({b, t, kept, m});
          continue;
        }
        const auto chosen = nearest_to_centroids(world.pool, model, *retained, m);
        if (chosen.size() < b) table.shortfalls.push_back({b, t, chosen.size()});
        row_for(strategy, b).per_trial.push_back(
            student_fidelity(world, teacher, teacher_seed, chosen));
      }
    }
  }
  for (auto& r : table.rows) summarize(r);
  return table;
}

}  // namespace cliq::sim

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cliq/cluster.hpp"
#include "cliq/matrix.hpp"

// Desk-scale model-extraction simulator: a latent-cluster query world, a
// teacher whose outputs carry a quantization-style perturbation, and a
// memorizing student rebuilt from budgeted queries.
namespace cliq::sim {

struct WorldParams {
  std::size_t k_true = 30;
  std::size_t dim = 32;
  std::size_t pool_size = 2000;
  double zipf_s = 1.3;
  // Per-component stddev of the Gaussian jitter added to a prototype.
  double jitter = 0.1;
  double max_prototype_cosine = 0.5;
  std::size_t probes_per_cluster = 5;  // jittered probes, plus the prototype itself
  std::uint64_t seed = 42;
};

struct SimWorld {
  WorldParams params;
  Matrix prototypes;                 // k_true x dim, unit rows
  std::vector<double> cluster_mass;  // sums to 1
  double max_pairwise_cosine = 0.0;  // achieved prototype separation
  Matrix pool;                       // pool_size x dim, unit rows
  std::vector<int> labels;           // ground-truth cluster per pool row
  Matrix probes;                     // held-out grid covering every cluster
  std::vector<int> probe_labels;
};

// mass_k proportional to k^(-s), k = 1..count, normalized.
std::vector<double> zipf_masses(std::size_t count, double s);

// Largest-remainder split of `total` items by mass (ties to the lower
// index); every cluster gets at least one item when total allows.
std::vector<std::size_t> stratified_counts(std::span<const double> mass, std::size_t total);

// Pool members per cluster follow stratified_counts, in shuffled order.
// Throws InputError when separation cannot be reached in 1000 attempts.
SimWorld make_world(const WorldParams& params);

int nearest_prototype(const SimWorld& world, std::span<const double> x);

struct QuantizedTeacher {
  const SimWorld* world = nullptr;
  double noise_sigma = 0.0;
  double quant_step = 0.0;  // 0 = full precision
};

// Rounds to the nearest multiple of step (halfway cases away from zero).
double quantize(double value, double step);

// Full-precision response: the prototype of the nearest cluster.
std::vector<double> teacher_full(const SimWorld& world, std::span<const double> x);

// T_full(x) rounded to the output grid plus Gaussian noise seeded from
// (seed, bits of x); identical queries always get identical answers.
std::vector<double> teacher_respond(const QuantizedTeacher& teacher, std::span<const double> x,
                                    std::uint64_t seed);

// Memorizing student: answers with the stored response of the most
// cosine-similar stored query (lowest index on ties); zero vector when empty.
class StudentModel {
 public:
  explicit StudentModel(std::size_t dim) : dim_(dim) {}

  void add(std::span<const double> query, std::span<const double> response);
  std::vector<double> respond(std::span<const double> x) const;

  std::size_t size() const noexcept { return queries_.size(); }
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
  std::vector<std::vector<double>> queries_;
  std::vector<std::vector<double>> responses_;
};

StudentModel train_student(std::size_t dim, const Matrix& queries, const Matrix& responses);

// Mean squared-error imitation loss of `student` against targets.
double kd_loss(const StudentModel& student, const Matrix& queries, const Matrix& targets);

// Mean cosine(student(x), T_full(x)) over the given probe rows.
double fidelity(const StudentModel& student, const SimWorld& world, const Matrix& probes);

enum class ExtractionStrategy { kRandomUniform, kCliqUniform };

std::string_view to_string(ExtractionStrategy s);
ExtractionStrategy parse_extraction_strategy(std::string_view name);

struct ExperimentConfig {
  std::vector<ExtractionStrategy> strategies{ExtractionStrategy::kRandomUniform,
                                             ExtractionStrategy::kCliqUniform};
  std::vector<std::size_t> budgets{150};
  // Queries per retained cluster for cliq_uniform; 0 derives budget / K'.
  std::size_t m_per_cluster = 0;
  std::size_t trials = 20;
  std::uint64_t seed = 42;
  // Clustering used by cliq_uniform; k = 0 requests k_true clusters.
  ClusteringConfig clustering{.k = 0, .seed = 42, .minibatch_size = 0,
                              .max_iterations = 100, .min_cluster_size = 1};
};

struct FidelityRow {
  ExtractionStrategy strategy = ExtractionStrategy::kRandomUniform;
  std::size_t budget = 0;
  double noise_sigma = 0.0;
  double quant_step = 0.0;
  double mean_fidelity = 0.0;
  double std_fidelity = 0.0;  // sample stddev over trials
  std::size_t trials = 0;
  std::vector<double> per_trial;
};

// A cliq_uniform (trial, budget) whose budget is not K' * m.
struct BudgetMismatch {
  std::size_t budget = 0;
  std::size_t trial = 0;
  std::size_t retained_k = 0;
  std::size_t m_per_cluster = 0;
};

// A cliq_uniform (trial, budget) that spent fewer than `budget` queries
// because some retained clusters held fewer than m members.
struct BudgetShortfall {
  std::size_t budget = 0;
  std::size_t trial = 0;
  std::size_t used = 0;
};

struct FidelityTable {
  std::vector<FidelityRow> rows;
  std::vector<BudgetMismatch> mismatches;
  std::vector<BudgetShortfall> shortfalls;

  const FidelityRow* find(ExtractionStrategy s, std::size_t budget) const;
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

// Per trial: random_uniform reads each budget off the prefix of one seeded
// permutation of the pool; cliq_uniform clusters the pool and takes the m
// queries nearest each retained centroid (clusters smaller than m give all
// their members and the unspent budget is listed). Each student is scored by fidelity
// on the world's probe grid. Mismatched cliq budgets are listed, never
// adjusted; trials column counts the trials that actually ran.
FidelityTable run_budget_experiment(const SimWorld& world, const QuantizedTeacher& teacher,
                                    const ExperimentConfig& config);

}  // namespace cliq::sim

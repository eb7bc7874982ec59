// Runs every acceptance criterion and prints one PASS/FAIL line per check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cliq/analyze.hpp"
#include "cliq/cluster.hpp"
#include "cliq/embed.hpp"
#include "cliq/error.hpp"
#include "cliq/extractsim.hpp"
#include "cliq/genquery.hpp"
#include "cliq/mock_teacher.hpp"
#include "cliq/pipeline.hpp"
#include "cliq/random.hpp"
#include "cliq/textmetrics.hpp"
#include "fakes.hpp"
#include "oracles.hpp"

using namespace cliq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::vector<std::size_t> counts_of(const std::vector<int>& labels, std::size_t k) {
  std::vector<std::size_t> c(k, 0);
  for (int l : labels) ++c[static_cast<std::size_t>(l)];
  return c;
}

// 1. Mini-batch k-means recovers well separated blobs.
Outcome clustering_recovery() {
  Outcome o;
  const auto blobs = oracle::gaussian_blobs(5, 100, 16, 10.0, 1.0, 42);
  const auto start = std::chrono::steady_clock::now();
  ClusteringConfig cfg;
  cfg.k = 5;
  cfg.seed = 42;
  cfg.min_cluster_size = 1;
  const auto model = minibatch_kmeans(blobs.points, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double ari = oracle::adjusted_rand_index(model.assignments, blobs.labels);
  const auto lloyd = oracle::lloyd_kmeans(blobs.points, model.centroids);
  const double ari_lloyd = oracle::adjusted_rand_index(model.assignments, lloyd);
  o.require(ari >= 0.95, fmt("ARI vs generator %.4f < 0.95", ari));
  o.require(ari_lloyd >= 0.95, fmt("ARI vs Lloyd %.4f < 0.95", ari_lloyd));
  o.require(secs < 1.0, fmt("took %.3f s", secs));
  o.detail += (o.detail.empty() ? "" : " | ") +
              fmt("ARI=%.4f ARI_lloyd=%.4f", ari, ari_lloyd) + fmt(" t=%.3fs", secs);
  return o;
}

// 2. Round robin covers every cluster; random matches the hypergeometric oracle.
Outcome coverage_advantage() {
  Outcome o;
  const std::size_t k = 50, budget = 50;
  const auto labels = oracle::zipf_labels(2000, k, 1.2);
  const std::vector<std::size_t> budgets{budget};
  const auto rr = hit_rate_curve(labels, SelectionStrategy::kCliqRoundRobin, budgets, 1, 42);
  const auto rnd = hit_rate_curve(labels, SelectionStrategy::kRandomUniform, budgets, 100, 42);
  const double expected = oracle::expected_coverage_without_replacement(counts_of(labels, k), budget);
  o.require(rr.mean_covered[0] == 50.0, fmt("round robin covered %.0f", rr.mean_covered[0]));
  o.require(std::abs(rnd.mean_covered[0] - expected) <= 2.0,
            fmt("random mean %.3f vs oracle %.3f", rnd.mean_covered[0], expected));
  o.require(rnd.mean_covered[0] < 50.0, "random mean not below 50");
  o.detail += (o.detail.empty() ? "" : " | ") +
              fmt("cliq=%.0f/50 random=%.3f", rr.mean_covered[0], rnd.mean_covered[0]) +
              fmt(" oracle=%.3f", expected);
  return o;
}

// 3. CLIQ allocates exactly m per retained cluster; random is skewed.
Outcome allocation_balance() {
  Outcome o;
  const std::size_t k = 50, m = 10, budget = k * m;
  const auto labels = oracle::zipf_labels(5000, k, 1.2);
  const auto counts = counts_of(labels, k);
  o.require(*std::min_element(counts.begin(), counts.end()) >= m, "a cluster is smaller than m");

  const auto chosen = round_robin_selection(labels, budget);
  std::vector<int> picked;
  for (auto i : chosen) picked.push_back(labels[i]);
  const auto cliq_hist = allocation_histogram(picked, k);
  bool exact = cliq_hist.total == budget;
  for (const auto& [c, n] : cliq_hist.counts) exact = exact && n == m;
  o.require(exact, "CLIQ counts are not exactly m per cluster");
  o.require(cliq_hist.coefficient_of_variation == 0.0,
            fmt("CLIQ CV %.6f", cliq_hist.coefficient_of_variation));

  // Oracle: E[sum_k (c_k - B/K)^2] under hypergeometric draws.
  const double n = static_cast<double>(labels.size());
  const double b = static_cast<double>(budget);
  const double mean = b / static_cast<double>(k);
  double ss = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / n;
    ss += (b * p - mean) * (b * p - mean) + b * p * (1.0 - p) * (n - b) / (n - 1.0);
  }
  const double cv_oracle = std::sqrt(ss / static_cast<double>(k)) / mean;

  Rng rng(42);
  double cv_sum = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::vector<int> sel;
    for (auto i : rng.sample_without_replacement(labels.size(), budget)) sel.push_back(labels[i]);
    cv_sum += allocation_histogram(sel, k).coefficient_of_variation;
  }
  const double cv_random = cv_sum / trials;
  o.require(cv_random > 0.3, fmt("random CV %.3f <= 0.3", cv_random));
  o.require(std::abs(cv_random - cv_oracle) <= 0.1 * cv_oracle,
            fmt("random CV %.3f vs oracle %.3f", cv_random, cv_oracle));
  o.detail += (o.detail.empty() ? "" : " | ") + fmt("cliq CV=%.3f", cliq_hist.coefficient_of_variation) +
              fmt(" random CV=%.3f oracle=%.3f", cv_random, cv_oracle);
  return o;
}

// 4. Template-diversified generated variants are less redundant than
// near-duplicate originals.
Outcome redundancy_direction() {
  Outcome o;
  const std::vector<std::string> topics = {
      "bake sourdough bread at home",       "solve a quadratic equation",
      "plan a weekend trip to Lisbon",      "train for a first marathon",
      "write a cover letter for a nurse",   "repot an overgrown houseplant",
      "explain photosynthesis to a child",  "set up a python virtual environment",
      "negotiate a salary offer",           "care for a senior dog",
      "brew pour-over coffee",              "compose a haiku about winter",
      "budget for a family of four",        "learn basic guitar chords",
      "fix a leaking kitchen faucet",       "prepare for a job interview",
      "choose a beginner telescope",        "reduce screen time for teenagers",
      "start a compost pile",               "summarize the causes of world war one"};
  const std::vector<std::string> openers = {"How do I", "How can I", "how do i", "How do I really",
                                            "Please tell me how to"};
  std::vector<std::string> originals, generated;
  std::vector<int> orig_labels, gen_labels;
  for (std::size_t c = 0; c < topics.size(); ++c) {
    std::vector<std::string> cluster;
    for (const auto& op : openers) {
      cluster.push_back(op + " " + topics[c] + "?");
      originals.push_back(cluster.back());
      orig_labels.push_back(static_cast<int>(c));
    }
    const auto prompt = build_cluster_prompt(cluster, 1000, 8, 42 + c, static_cast<int>(c));
    for (const auto& q : parse_generated_queries(mock_teacher_reply(prompt.rendered))) {
      generated.push_back(q.instruction);
      gen_labels.push_back(static_cast<int>(c));
    }
  }
  const auto X = embed_local(originals, 256, 42);
  const auto G = embed_local(generated, 256, 42);
  const auto ro = intra_cluster_redundancy(X, orig_labels);
  const auto rg = intra_cluster_redundancy(G, gen_labels);
  std::size_t lower = 0;
  for (std::size_t c = 0; c < topics.size(); ++c) {
    const int id = static_cast<int>(c);
    if (rg.per_cluster.contains(id) && ro.per_cluster.contains(id) &&
        rg.per_cluster.at(id) < ro.per_cluster.at(id)) {
      ++lower;
    }
  }
  const double share = static_cast<double>(lower) / static_cast<double>(topics.size());
  o.require(share >= 0.95, fmt("generated lower in only %.0f%% of clusters", 100.0 * share));
  o.detail += (o.detail.empty() ? "" : " | ") + fmt("lower in %.0f%% of clusters", 100.0 * share) +
              fmt(" (pooled original %.3f generated %.3f)", *ro.pooled_mean, *rg.pooled_mean);
  return o;
}

// 5. Adversarial teacher replies all parse; valid arrays round-trip.
Outcome parser_robustness() {
  Outcome o;
  const std::vector<std::string> cases = {
      "```json\n[{\"instruction\": \"Fenced one\", \"input\": \"\"}]\n```",
      "Sure! Here you go:\n[{\"instruction\": \"With prose\"}]\nHope that helps.",
      "[{\"instruction\": \"Complete\"}, {\"instruction\": \"Trunc",
      "[{\"instruction\": \"A\"}, {\"instruction\": \"B\", \"input\": \"x\"}] trailing } ] garbage",
      "[{\"instruction\": \"Brackets [inside] {braces} ]\", \"input\": \"[1, 2]\"}]",
      "[{\"instruction\": \"Escaped \\\"quote\\\" and \\\\ slash\"}]",
      "```\n[\n  {\"instruction\": \"Unlabelled fence\"},\n  {\"instruction\": \"Second\"},\n",
      "[{\"instruction\": \"Nested\", \"meta\": {\"tags\": [\"a]\", \"{b\"]}}, {\"instruction\": ",
      "[{\"instruction\": \"\"}, {\"input\": \"no instruction\"}, {\"instruction\": \"Kept\"}]",
      "Output:\n```json\n[{\"instruction\": \"Unicode café ✓\", \"input\": \"日本\"}]\n```\nDone.",
  };
  const std::vector<std::size_t> expected_sizes = {1, 1, 1, 2, 1, 1, 2, 1, 1, 1};
  std::size_t ok = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    try {
      const auto parsed = parse_generated_queries(cases[i]);
      const auto canonical = serialize_generated_queries(parsed);
      const bool sized = parsed.size() == expected_sizes[i];
      const bool idempotent = parse_generated_queries(canonical) == parsed &&
                              serialize_generated_queries(parse_generated_queries(canonical)) == canonical;
      bool nonempty = true;
      for (const auto& q : parsed) nonempty = nonempty && !q.instruction.empty();
      if (sized && idempotent && nonempty) {
        ++ok;
      } else {
        o.require(false, "case " + std::to_string(i) + " gave " + std::to_string(parsed.size()) + " queries");
      }
    } catch (const Error& e) {
      o.require(false, "case " + std::to_string(i) + " threw: " + e.what());
    }
  }
  o.detail += (o.detail.empty() ? "" : " | ") + std::to_string(ok) + "/10 cases";
  return o;
}

std::string chat_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

// 6. Four failures then success on attempt five; five failures surface.
Outcome retry_contract() {
  Outcome o;
  TeacherEndpointConfig cfg;
  {
    testing::ScriptedTransport t;
    t.failures = 4;
    t.success_body = chat_body("[{\"instruction\": \"ok\"}]");
    testing::VirtualClock clock;
    const auto r = chat_complete(cfg, "prompt", t, clock.sleeper());
    o.require(r.attempts == 5, "attempts " + std::to_string(r.attempts));
    o.require(t.requests() == 5, "requests " + std::to_string(t.requests()));
    o.require(clock.delays == std::vector<double>{1, 2, 4, 8}, "delays differ from 1,2,4,8");
    o.require(r.content == "[{\"instruction\": \"ok\"}]", "wrong content");
  }
  {
    testing::ScriptedTransport t;
    t.failures = 5;
    t.success_body = chat_body("never");
    testing::VirtualClock clock;
    bool threw = false;
    try {
      chat_complete(cfg, "prompt", t, clock.sleeper());
    } catch (const UpstreamError&) {
      threw = true;
    }
    o.require(threw, "no error after five failures");
    o.require(t.requests() == 5, "requests " + std::to_string(t.requests()) + " after five failures");
  }
  o.detail += (o.detail.empty() ? "" : " | ") + std::string("delays 1,2,4,8 s; exhaustion after 5 requests");
  return o;
}

metrics::Tokens random_tokens(Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  metrics::Tokens t(min_len + rng.below(max_len - min_len + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng.below(vocab)));
  return t;
}

std::string join(const metrics::Tokens& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

// 7. Metrics agree with brute-force oracles; identity scores 1.
Outcome text_metric_equivalence() {
  Outcome o;
  Rng rng(2024);
  double worst = 0.0;
  auto cmp = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_tokens(rng, 0, 10, 5);
    const auto r = random_tokens(rng, 0, 10, 5);
    cmp(metrics::bleu(c, r), oracle::bleu(c, r, 4));
    for (std::size_t n : {1u, 2u}) {
      const auto got = metrics::rouge_n(c, r, n);
      const auto want = oracle::rouge_n(c, r, n);
      cmp(got.precision, want[0]);
      cmp(got.recall, want[1]);
      cmp(got.f1, want[2]);
    }
    const auto l = metrics::rouge_l(c, r);
    const auto lw = oracle::rouge_l(c, r);
    cmp(l.precision, lw[0]);
    cmp(l.recall, lw[1]);
    cmp(l.f1, lw[2]);

    std::vector<metrics::Tokens> cs, rs;
    std::string ctext, rtext;
    for (std::size_t s = 0, ns = 1 + rng.below(3); s < ns; ++s) {
      cs.push_back(random_tokens(rng, 1, 5, 5));
      ctext += (s ? "\n" : "") + join(cs.back());
    }
    for (std::size_t s = 0, ns = 1 + rng.below(3); s < ns; ++s) {
      rs.push_back(random_tokens(rng, 1, 5, 5));
      rtext += (s ? "\n" : "") + join(rs.back());
    }
    const auto ls = metrics::rouge_lsum(ctext, rtext);
    const auto lsw = oracle::rouge_lsum(cs, rs);
    cmp(ls.precision, lsw[0]);
    cmp(ls.recall, lsw[1]);
    cmp(ls.f1, lsw[2]);

    const auto x = random_tokens(rng, 4, 12, 6);
    const auto id = metrics::score_pair(join(x), join(x));
    for (double v : {metrics::bleu(x, x), id.rouge1.f1, id.rouge2.f1, id.rougeL.f1, id.rougeLsum.f1}) {
      if (v != 1.0) o.require(false, fmt("identity scored %.17g", v));
    }
  }
  o.require(worst <= 1e-9, fmt("max deviation %.3g", worst));
  o.detail += (o.detail.empty() ? "" : " | ") + fmt("max deviation %.3g over 100 pairs", worst);
  return o;
}

// 8. Cluster-aware extraction beats random; lower noise helps; random saturates.
Outcome extraction_ordering() {
  Outcome o;
  sim::WorldParams wp;
  wp.k_true = 30;
  wp.zipf_s = 1.3;
  wp.seed = 42;
  const auto world = sim::make_world(wp);
  sim::ExperimentConfig ec;
  ec.budgets = {30, 60, 150, 300};
  ec.trials = 20;
  ec.seed = 42;
  const sim::QuantizedTeacher int4{&world, 0.05, 0.0};
  const sim::QuantizedTeacher int8{&world, 0.02, 0.0};
  const auto t4 = sim::run_budget_experiment(world, int4, ec);
  const auto t8 = sim::run_budget_experiment(world, int8, ec);

  using S = sim::ExtractionStrategy;
  const auto* cliq = t4.find(S::kCliqUniform, 150);
  const auto* rnd = t4.find(S::kRandomUniform, 150);
  if (cliq == nullptr || rnd == nullptr) {
    o.require(false, "missing budget-150 rows");
    return o;
  }
  o.require(cliq->trials == 20, "cliq ran " + std::to_string(cliq->trials) + " of 20 trials");
  o.require(cliq->mean_fidelity > rnd->mean_fidelity,
            fmt("cliq %.4f <= random %.4f", cliq->mean_fidelity, rnd->mean_fidelity));
  for (S s : {S::kRandomUniform, S::kCliqUniform}) {
    const auto* lo = t8.find(s, 150);
    const auto* hi = t4.find(s, 150);
    o.require(lo && hi && lo->mean_fidelity >= hi->mean_fidelity,
              std::string(sim::to_string(s)) + " fidelity at noise 0.02 below noise 0.05");
  }
  for (const auto* table : {&t4, &t8}) {
    for (std::size_t i = 1; i < ec.budgets.size(); ++i) {
      const auto* prev = table->find(S::kRandomUniform, ec.budgets[i - 1]);
      const auto* next = table->find(S::kRandomUniform, ec.budgets[i]);
      const double se = next->std_fidelity / std::sqrt(static_cast<double>(next->trials));
      o.require(next->mean_fidelity >= prev->mean_fidelity - se,
                "random fidelity regressed at budget " + std::to_string(ec.budgets[i]));
    }
  }
  o.detail += (o.detail.empty() ? "" : " | ") +
              fmt("B=150 sigma=0.05: cliq %.4f random %.4f", cliq->mean_fidelity, rnd->mean_fidelity) +
              fmt(" | sigma=0.02: cliq %.4f random %.4f", t8.find(S::kCliqUniform, 150)->mean_fidelity,
                  t8.find(S::kRandomUniform, 150)->mean_fidelity) +
              " | mismatches " + std::to_string(t4.mismatches.size() + t8.mismatches.size()) +
              ", shortfalls " + std::to_string(t4.shortfalls.size() + t8.shortfalls.size());
  return o;
}

// Synthetic instruction corpus large enough for the default K = 100.
void write_corpus(const fs::path& path, std::size_t n) {
  const std::vector<std::string> verbs = {"Explain", "Summarize", "Describe", "Compare", "Outline",
                                          "Critique", "Teach me", "List facts about"};
  const std::vector<std::string> subjects = {
      "volcanoes", "the french revolution", "binary search", "sourdough starters", "jazz harmony",
      "tax brackets", "orbital mechanics", "knitting patterns", "vaccines", "chess openings",
      "coral reefs", "the stock market", "rust lifetimes", "marathon training", "origami cranes",
      "black holes", "medieval castles", "sql joins", "bird migration", "watercolor painting",
      "climate models", "roman roads", "neural networks", "tea ceremonies", "glaciers"};
  const std::vector<std::string> angles = {"for a child", "in one paragraph", "with an example",
                                           "for an expert", "step by step", "using an analogy"};
  Rng rng(7);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = verbs[rng.below(verbs.size())];
    const auto& s = subjects[rng.below(subjects.size())];
    const auto& a = angles[rng.below(angles.size())];
    arr.push_back({{"instruction", v + " " + s + " " + a + "."},
                   {"input", i % 5 == 0 ? "Note " + std::to_string(i) : ""},
                   {"output", "Answer " + std::to_string(i)}});
  }
  std::ofstream(path) << arr.dump(1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Two default runs produce identical artifacts and record the defaults.
Outcome end_to_end_determinism() {
  Outcome o;
  testing::TempDir dir;
  write_corpus(dir / "corpus.json", 1500);
  const fs::path run = dir / "artifacts";
  // Same directory both times so the recorded artifact_dir matches too.
  std::vector<std::map<std::string, std::string>> snapshots;
  for (int attempt = 0; attempt < 2; ++attempt) {
    fs::remove_all(run);
    RunConfig c;
    c.dataset_path = (dir / "corpus.json").string();
    c.artifact_dir = run.string();
    c.teacher_backend = TeacherBackend::kMock;
    CommandContext ctx;
    std::ostringstream err;
    const int rc = run_command("pipeline", c, ctx, err);
    o.require(rc == 0, "pipeline exit " + std::to_string(rc) + ": " + err.str());
    if (rc != 0) return o;
    auto& snap = snapshots.emplace_back();
    for (const auto& entry : fs::recursive_directory_iterator(run)) {
      if (!entry.is_regular_file() || entry.path().filename() == ".cliq.lock") continue;
      snap[fs::relative(entry.path(), run).string()] = slurp(entry.path());
    }
  }
  const std::size_t files = snapshots[0].size();
  for (const auto& [name, bytes] : snapshots[0]) {
    const auto it = snapshots[1].find(name);
    if (it == snapshots[1].end() || it->second != bytes) o.require(false, name + " differs");
  }
  o.require(snapshots[1].size() == files, "second run wrote a different file set");
  const auto rc = nlohmann::json::parse(slurp(run / "resolved_config.json"));
  const auto cfg = rc.contains("config") ? rc["config"] : rc;
  const std::map<std::string, nlohmann::json> table7 = {
      {"clustering.k", 100},
      {"clustering.seed", 42},
      {"clustering.min_cluster_size", 5},
      {"generation.examples_per_cluster", 1000},
      {"generation.queries_per_cluster", 10},
      {"generation.temperature", 0.7},
      {"generation.max_tokens", 16384},
      {"generation.timeout_s", 300.0},
      {"generation.max_attempts", 5}};
  for (const auto& [key, want] : table7) {
    o.require(cfg.contains(key) && cfg[key] == want, key + " recorded as " +
                                                          (cfg.contains(key) ? cfg[key].dump() : "nothing"));
  }
  o.detail += (o.detail.empty() ? "" : " | ") + std::to_string(files) + " artifacts identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1 clustering recovery", 1.0, clustering_recovery},
      {"2 coverage advantage", 5.0, coverage_advantage},
      {"3 allocation balance", 1.0, allocation_balance},
      {"4 redundancy direction", 5.0, redundancy_direction},
      {"5 parser robustness", 1.0, parser_robustness},
      {"6 retry contract", 0.0, retry_contract},
      {"7 text-metric equivalence", 5.0, text_metric_equivalence},
      {"8 extraction ordering", 30.0, extraction_ordering},
      {"9 end-to-end determinism", 0.0, end_to_end_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0.0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt(" | runtime %.2f s over limit %.0f s", secs, c.limit_s);
    }
    std::printf("%s  %-28s %7.3f s  %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

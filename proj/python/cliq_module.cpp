#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cliq/analyze.hpp"
#include "cliq/cluster.hpp"
#include "cliq/config.hpp"
#include "cliq/embed.hpp"
#include "cliq/error.hpp"
#include "cliq/genquery.hpp"
#include "cliq/pipeline.hpp"
#include "cliq/textmetrics.hpp"

namespace py = pybind11;
using namespace cliq;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw InputError("shape", "expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::dict triple(const metrics::ScoreTriple& s) {
  py::dict d;
  d["precision"] = s.precision;
  d["recall"] = s.recall;
  d["f1"] = s.f1;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cliq, m) {
  m.doc() = "Cluster-aware query selection, analysis and text metrics";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto input = py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<MissingArtifactError>(m, "MissingArtifactError", input.ptr());
  py::register_exception<UpstreamError>(m, "UpstreamError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  m.def("tokenize", [](std::string_view s) { return metrics::tokenize(s); });
  m.def("bleu",
        [](std::string_view c, std::string_view r, std::size_t max_n) {
          return metrics::bleu(metrics::tokenize(c), metrics::tokenize(r), max_n);
        },
        py::arg("candidate"), py::arg("reference"), py::arg("max_n") = 4);
  m.def("rouge_n",
        [](std::string_view c, std::string_view r, std::size_t n) {
          return triple(metrics::rouge_n(metrics::tokenize(c), metrics::tokenize(r), n));
        },
        py::arg("candidate"), py::arg("reference"), py::arg("n"));
  m.def("rouge_l", [](std::string_view c, std::string_view r) {
    return triple(metrics::rouge_l(metrics::tokenize(c), metrics::tokenize(r)));
  });
  m.def("rouge_lsum",
        [](std::string_view c, std::string_view r) { return triple(metrics::rouge_lsum(c, r)); });
  m.def("score_pair", [](std::string_view c, std::string_view r) {
    const auto s = metrics::score_pair(c, r);
    py::dict d;
    d["bleu"] = s.bleu;
    d["rouge1"] = triple(s.rouge1);
    d["rouge2"] = triple(s.rouge2);
    d["rougeL"] = triple(s.rougeL);
    d["rougeLsum"] = triple(s.rougeLsum);
    return d;
  });

  m.def("parse_generated_queries", [](std::string_view raw) {
    py::list out;
    for (const auto& q : parse_generated_queries(raw)) {
      py::dict d;
      d["instruction"] = q.instruction;
      d["input"] = q.input;
      out.append(d);
    }
    return out;
  });

  m.def("embed_local",
        [](const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed) {
          return to_array(embed_local(texts, dim, seed));
        },
        py::arg("texts"), py::arg("dim") = 256, py::arg("seed") = 0);

  m.def("minibatch_kmeans",
        [](const Array& x, std::size_t k, std::uint64_t seed, std::size_t minibatch_size,
           std::size_t max_iterations) {
          ClusteringConfig cfg;
          cfg.k = k;
          cfg.seed = seed;
          cfg.minibatch_size = minibatch_size;
          cfg.max_iterations = max_iterations;
          const auto model = minibatch_kmeans(to_matrix(x), cfg);
          py::dict d;
          d["centroids"] = to_array(model.centroids);
          d["assignments"] = model.assignments;
          d["sizes"] = model.sizes;
          d["inertia"] = model.inertia;
          d["iterations"] = model.iterations_run;
          return d;
        },
        py::arg("x"), py::arg("k"), py::arg("seed") = 42, py::arg("minibatch_size") = 0,
        py::arg("max_iterations") = 100);

  m.def("round_robin_selection", [](const std::vector<int>& labels, std::size_t budget) {
    return round_robin_selection(labels, budget);
  });
  m.def("hit_rate_curve",
        [](const std::vector<int>& labels, const std::string& strategy,
           const std::vector<std::size_t>& budgets, std::size_t trials, std::uint64_t seed) {
          const auto c = hit_rate_curve(labels, parse_selection_strategy(strategy), budgets, trials, seed);
          py::dict d;
          d["budgets"] = c.budgets;
          d["mean_covered"] = c.mean_covered;
          d["std_covered"] = c.std_covered;
          d["total_clusters"] = c.total_clusters;
          return d;
        },
        py::arg("labels"), py::arg("strategy"), py::arg("budgets"), py::arg("trials") = 100,
        py::arg("seed") = 42);
  m.def("intra_cluster_redundancy", [](const Array& x, const std::vector<int>& labels) {
    const auto r = intra_cluster_redundancy(to_matrix(x), labels);
    py::dict d;
    d["per_cluster"] = r.per_cluster;
    d["pooled_mean"] = r.pooled_mean;
    d["excluded"] = r.excluded;
    return d;
  });
  m.def("pca_project_2d",
        [](const Array& x, std::uint64_t seed) { return to_array(pca_project_2d(to_matrix(x), seed).coords); },
        py::arg("x"), py::arg("seed") = 0);

  m.def("config_keys", [] { return config_keys(); });
  m.def("resolved_config",
        [](const std::vector<std::string>& overrides) {
          RunConfig c;
          apply_overrides(c, overrides);
          return c.to_json().dump();
        },
        py::arg("overrides") = std::vector<std::string>{});
  m.def("run_command",
        [](const std::string& name, const std::vector<std::string>& overrides) {
          RunConfig c;
          apply_overrides(c, overrides);
          CommandContext ctx;
          std::ostringstream err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_command(name, c, ctx, err);
          }
          return py::make_tuple(code, err.str());
        },
        py::arg("name"), py::arg("overrides") = std::vector<std::string>{},
        "Runs one pipeline command with key=value overrides; returns (exit_code, error_records).");
}

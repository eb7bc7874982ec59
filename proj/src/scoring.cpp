#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "cliq/error.hpp"
#include "cliq/textmetrics.hpp"

namespace cliq::metrics {

namespace {

constexpr std::size_t kColumns = 13;

std::array<double, kColumns> flatten(const PairScores& s) {
  return {s.bleu,
          s.rouge1.precision,    s.rouge1.recall,    s.rouge1.f1,
          s.rouge2.precision,    s.rouge2.recall,    s.rouge2.f1,
          s.rougeL.precision,    s.rougeL.recall,    s.rougeL.f1,
          s.rougeLsum.precision, s.rougeLsum.recall, s.rougeLsum.f1};
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t score_jsonl(std::istream& in, std::ostream& csv, bool percent) {
  csv << "pair,bleu,rouge1_p,rouge1_r,rouge1_f,rouge2_p,rouge2_r,rouge2_f,rougeL_p,rougeL_r,"
         "rougeL_f,rougeLsum_p,rougeLsum_r,rougeLsum_f\n";
  const double scale = percent ? 100.0 : 1.0;
  std::array<double, kColumns> sums{};
  std::size_t count = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string cand, ref;
    try {
      const auto j = nlohmann::json::parse(line);
      cand = j.at("candidate").get<std::string>();
      ref = j.at("reference").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("jsonl", "line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto values = flatten(score_pair(cand, ref));
    csv << count;
    for (std::size_t c = 0; c < kColumns; ++c) {
      csv << ',' << num(values[c] * scale);
      sums[c] += values[c];
    }
    csv << '\n';
    ++count;
  }
  if (count > 0) {
    csv << "mean";
    for (std::size_t c = 0; c < kColumns; ++c) {
      csv << ',' << num(sums[c] / static_cast<double>(count) * scale);
    }
    csv << '\n';
  }
  return count;
}

}  // namespace cliq::metrics

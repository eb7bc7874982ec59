#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cliq::metrics {

using Tokens = std::vector<std::string>;

struct ScoreTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// f1 = 2pr/(p+r), or 0 when p+r == 0.
ScoreTriple make_score(double precision, double recall);

// Lowercase, split on (Unicode) whitespace, strip leading and trailing ASCII
// punctuation from each token; tokens that become empty are dropped.
Tokens tokenize(std::string_view text);

inline constexpr double kBleuEpsilon = 1e-9;

// Sentence BLEU: geometric mean of clipped n-gram precisions for n = 1..max_n,
// a zero match count replaced by kBleuEpsilon, times the brevity penalty
// min(1, exp(1 - |ref|/|cand|)). Empty candidate scores 0.
double bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n = 4);

ScoreTriple rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

ScoreTriple rouge_l(const Tokens& candidate, const Tokens& reference);

// Positions of `reference` covered by one canonical LCS with `candidate`:
// among all longest common subsequences, the one whose reference positions
// are lexicographically greatest when compared from the last position back.
std::vector<std::size_t> lcs_reference_positions(const Tokens& reference,
                                                 const Tokens& candidate);

// Summary-level ROUGE-L over newline-separated sentences using union-LCS.
ScoreTriple rouge_lsum(std::string_view candidate, std::string_view reference);

std::vector<std::string> split_sentences(std::string_view text);

struct PairScores {
  double bleu = 0.0;
  ScoreTriple rouge1;
  ScoreTriple rouge2;
  ScoreTriple rougeL;
  ScoreTriple rougeLsum;
};

PairScores score_pair(std::string_view candidate, std::string_view reference);

// Batch scorer: reads JSONL {"candidate","reference"} pairs and writes a CSV
// with one row per pair followed by a "mean" row. Fractions by default,
// percentages when `percent` is set. Returns the number of pairs.
std::size_t score_jsonl(std::istream& in, std::ostream& csv, bool percent = false);

}  // namespace cliq::metrics

#include "cliq/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace cliq::metrics {

ScoreTriple make_score(double precision, double recall) {
  ScoreTriple s{precision, recall, 0.0};
  if (precision + recall > 0.0) s.f1 = 2.0 * precision * recall / (precision + recall);
  return s;
}

namespace {

// Length of a Unicode whitespace sequence at s[i], or 0.
std::size_t whitespace_at(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  auto byte = [&](std::size_t k) {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0;
  };
  if (c == 0xc2 && (byte(1) == 0x85 || byte(1) == 0xa0)) return 2;  // NEL, NBSP
  if (c == 0xe1 && byte(1) == 0x9a && byte(2) == 0x80) return 3;    // U+1680
  if (c == 0xe2 && byte(1) == 0x80) {
    const auto b = byte(2);
    if ((b >= 0x80 && b <= 0x8a) || b == 0xa8 || b == 0xa9 || b == 0xaf) return 3;
  }
  if (c == 0xe2 && byte(1) == 0x81 && byte(2) == 0x9f) return 3;  // U+205F
  if (c == 0xe3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2f) || (u >= 0x3a && u <= 0x40) || (u >= 0x5b && u <= 0x60) ||
         (u >= 0x7b && u <= 0x7e);
}

void flush(std::string& word, Tokens& out) {
  std::size_t b = 0, e = word.size();
  while (b < e && is_ascii_punct(word[b])) ++b;
  while (e > b && is_ascii_punct(word[e - 1])) --e;
  if (e > b) out.push_back(word.substr(b, e - b));
  word.clear();
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngram_counts(const Tokens& t, std::size_t n) {
  NgramCounts counts;
  if (t.size() < n) return counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++counts[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (const auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

// table[i][j] = LCS(a[0..i), b[0..j))
std::vector<std::vector<std::size_t>> lcs_table(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string word;
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t ws = whitespace_at(text, i)) {
      flush(word, out);
      i += ws;
      continue;
    }
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    word.push_back(c);
    ++i;
  }
  flush(word, out);
  return out;
}

double bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n) {
  if (candidate.empty() || max_n == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    const std::size_t matches =
        clipped_overlap(ngram_counts(candidate, n), ngram_counts(reference, n));
    const double numerator = matches > 0 ? static_cast<double>(matches) : kBleuEpsilon;
    log_sum += std::log(numerator / static_cast<double>(std::max<std::size_t>(total, 1)));
  }
  const double ratio =
      static_cast<double>(reference.size()) / static_cast<double>(candidate.size());
  const double bp = std::min(1.0, std::exp(1.0 - ratio));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

ScoreTriple rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  if (n == 0) return {};
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  const std::size_t cand_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  const std::size_t ref_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
  return make_score(cand_total ? overlap / static_cast<double>(cand_total) : 0.0,
                    ref_total ? overlap / static_cast<double>(ref_total) : 0.0);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) { return lcs_table(a, b)[a.size()][b.size()]; }

ScoreTriple rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return {};
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  return make_score(lcs / static_cast<double>(candidate.size()),
                    lcs / static_cast<double>(reference.size()));
}

std::vector<std::size_t> lcs_reference_positions(const Tokens& reference,
                                                 const Tokens& candidate) {
  const auto t = lcs_table(reference, candidate);
  std::size_t remaining = t[reference.size()][candidate.size()];
  std::vector<std::size_t> positions;
  // Bounds are exclusive: the next (earlier) match must lie before both.
  std::size_t ref_bound = reference.size();
  std::size_t cand_bound = candidate.size();
  while (remaining > 0) {
    bool found = false;
    // Greedy from the back: the largest reference position that can end an
    // LCS of the required length, paired with its largest candidate position.
    for (std::size_t i = ref_bound; i-- > 0 && !found;) {
      for (std::size_t j = cand_bound; j-- > 0;) {
        if (reference[i] == candidate[j] && t[i][j] + 1 == remaining) {
          positions.push_back(i);
          ref_bound = i;
          cand_bound = j;
          found = true;
          break;
        }
      }
    }
    if (!found) break;  // unreachable for a consistent table
    --remaining;
  }
  std::reverse(positions.begin(), positions.end());
  return positions;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    out.emplace_back(text.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

ScoreTriple rouge_lsum(std::string_view candidate, std::string_view reference) {
  std::vector<Tokens> cand_sents, ref_sents;
  for (const auto& s : split_sentences(candidate)) {
    if (auto t = tokenize(s); !t.empty()) cand_sents.push_back(std::move(t));
  }
  for (const auto& s : split_sentences(reference)) {
    if (auto t = tokenize(s); !t.empty()) ref_sents.push_back(std::move(t));
  }
  std::size_t cand_total = 0, ref_total = 0;
  std::map<std::string, std::size_t> cand_counts, ref_counts;
  for (const auto& s : cand_sents) {
    cand_total += s.size();
    for (const auto& tok : s) ++cand_counts[tok];
  }
  for (const auto& s : ref_sents) {
    ref_total += s.size();
    for (const auto& tok : s) ++ref_counts[tok];
  }
  if (cand_total == 0 || ref_total == 0) return {};

  std::size_t hits = 0;
  for (const auto& ref : ref_sents) {
    std::set<std::size_t> united;
    for (const auto& cand : cand_sents) {
      for (std::size_t p : lcs_reference_positions(ref, cand)) united.insert(p);
    }
    // A token counts only while both sides still have unmatched copies of it.
    for (std::size_t p : united) {
      const auto& tok = ref[p];
      if (ref_counts[tok] > 0 && cand_counts[tok] > 0) {
        ++hits;
        --ref_counts[tok];
        --cand_counts[tok];
      }
    }
  }
  return make_score(static_cast<double>(hits) / static_cast<double>(cand_total),
                    static_cast<double>(hits) / static_cast<double>(ref_total));
}

PairScores score_pair(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  PairScores s;
  s.bleu = bleu(c, r);
  s.rouge1 = rouge_n(c, r, 1);
  s.rouge2 = rouge_n(c, r, 2);
  s.rougeL = rouge_l(c, r);
  s.rougeLsum = rouge_lsum(candidate, reference);
  return s;
}

}  // namespace cliq::metrics

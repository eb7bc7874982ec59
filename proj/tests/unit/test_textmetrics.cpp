#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cliq/error.hpp"
#include "cliq/random.hpp"
#include "cliq/textmetrics.hpp"
#include "oracles.hpp"

using namespace cliq;
using namespace cliq::metrics;

namespace {

Tokens random_tokens(Rng& rng, std::size_t max_len, std::size_t vocab) {
  Tokens t(rng.below(max_len + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng.below(vocab)));
  return t;
}

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

TEST_CASE("tokenizer lowercases, splits on unicode space and strips punctuation") {
  CHECK(tokenize("Hello, World!") == Tokens{"hello", "world"});
  CHECK(tokenize("a b　c\td") == Tokens{"a", "b", "c", "d"});
  CHECK(tokenize("--- ... ?!") == Tokens{});
  CHECK(tokenize("don't (x) e.g.") == Tokens{"don't", "x", "e.g"});
  CHECK(tokenize("Ünïcode ÉTÉ") == Tokens{"Ünïcode", "ÉtÉ"});
  CHECK(tokenize("").empty());
}

TEST_CASE("identical texts score exactly one") {
  const Tokens t{"the", "cat", "sat", "on", "the", "mat"};
  CHECK(bleu(t, t) == 1.0);
  CHECK(rouge_n(t, t, 1).f1 == 1.0);
  CHECK(rouge_n(t, t, 2).f1 == 1.0);
  CHECK(rouge_l(t, t).f1 == 1.0);
  CHECK(rouge_lsum("the cat\nsat on the mat", "the cat\nsat on the mat").f1 == 1.0);
}

TEST_CASE("BLEU edge cases") {
  const Tokens ref{"a", "b", "c", "d"};
  CHECK(bleu({}, ref) == 0.0);
  // No 4-gram overlap: the epsilon keeps the score tiny but positive.
  const double b = bleu({"a", "b", "c", "x"}, ref);
  CHECK(b > 0.0);
  CHECK(b < 1e-2);
  // Short candidate: brevity penalty exp(1 - 4/2).
  CHECK(bleu({"a", "b"}, ref, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(bleu({"a"}, {}, 1) == doctest::Approx(kBleuEpsilon));
}

TEST_CASE("ROUGE hand-checked values") {
  const Tokens c{"the", "cat", "was", "found", "under", "the", "bed"};
  const Tokens r{"the", "cat", "was", "under", "the", "bed"};
  const auto r1 = rouge_n(c, r, 1);
  CHECK(r1.precision == doctest::Approx(6.0 / 7.0));
  CHECK(r1.recall == 1.0);
  const auto r2 = rouge_n(c, r, 2);
  CHECK(r2.precision == doctest::Approx(4.0 / 6.0));
  CHECK(r2.recall == doctest::Approx(4.0 / 5.0));
  CHECK(lcs_length(c, r) == 6);
  CHECK(rouge_l(c, {}).f1 == 0.0);
  CHECK(rouge_n({"a"}, {"a"}, 2).f1 == 0.0);
}

TEST_CASE("canonical LCS positions prefer late reference positions") {
  // Both "a" positions are valid singletons; the later one wins.
  CHECK(lcs_reference_positions({"a", "b", "a"}, {"a"}) == std::vector<std::size_t>{2});
  CHECK(lcs_reference_positions({"x", "y"}, {"z"}).empty());
}

TEST_CASE("ROUGE-Lsum union LCS example") {
  // Reference sentence r1 = w1..w5; candidates c1 = w1 w2 w6 w7 w8, c2 = w1 w3 w8 w9 w5.
  const auto s = rouge_lsum("w1 w2 w6 w7 w8\nw1 w3 w8 w9 w5", "w1 w2 w3 w4 w5");
  // Union LCS covers w1 w2 w3 w5 -> 4 hits; 5 reference tokens, 10 candidate tokens.
  CHECK(s.recall == doctest::Approx(4.0 / 5.0));
  CHECK(s.precision == doctest::Approx(4.0 / 10.0));
  CHECK(rouge_lsum("", "x").f1 == 0.0);
  CHECK(split_sentences("a\n\nb") == std::vector<std::string>{"a", "", "b"});
}

TEST_CASE("property: metrics agree with brute-force oracles") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_tokens(rng, 8, 4);
    const auto r = random_tokens(rng, 8, 4);
    REQUIRE(bleu(c, r) == doctest::Approx(oracle::bleu(c, r, 4)).epsilon(1e-12));
    for (std::size_t n : {1u, 2u}) {
      const auto got = rouge_n(c, r, n);
      const auto want = oracle::rouge_n(c, r, n);
      REQUIRE(std::abs(got.precision - want[0]) < 1e-12);
      REQUIRE(std::abs(got.recall - want[1]) < 1e-12);
      REQUIRE(std::abs(got.f1 - want[2]) < 1e-12);
    }
    REQUIRE(lcs_length(c, r) == oracle::lcs_exhaustive(c, r));
    REQUIRE(lcs_reference_positions(r, c) == oracle::lcs_positions_exhaustive(r, c));
  }
}

TEST_CASE("property: scores are bounded and symmetric where expected") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_tokens(rng, 10, 5);
    const auto r = random_tokens(rng, 10, 5);
    const double b = bleu(c, r);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    const auto l1 = rouge_l(c, r), l2 = rouge_l(r, c);
    CHECK(l1.f1 == doctest::Approx(l2.f1));
    CHECK(l1.precision == doctest::Approx(l2.recall));
    const auto s = score_pair(join(c), join(r));
    for (double v : {s.rouge1.f1, s.rouge2.f1, s.rougeL.f1, s.rougeLsum.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // One sentence per side: Lsum reduces to L.
    CHECK(s.rougeLsum.f1 == doctest::Approx(s.rougeL.f1));
  }
}

TEST_CASE("batch scoring writes one row per pair plus a mean row") {
  std::istringstream in(
      "{\"candidate\": \"a b c d\", \"reference\": \"a b c d\"}\n"
      "\n"
      "{\"candidate\": \"x\", \"reference\": \"y\"}\n");
  std::ostringstream out;
  CHECK(score_jsonl(in, out, true) == 2);
  std::istringstream lines(out.str());
  std::string header, row0, row1, mean;
  std::getline(lines, header);
  std::getline(lines, row0);
  std::getline(lines, row1);
  std::getline(lines, mean);
  CHECK(header.rfind("pair,bleu,rouge1_p", 0) == 0);
  CHECK(std::count(header.begin(), header.end(), ',') == 13);
  CHECK(row0.rfind("0,100,100,100,100", 0) == 0);
  CHECK(row1.rfind("1,", 0) == 0);
  CHECK(mean.rfind("mean,", 0) == 0);

  std::istringstream bad("{\"candidate\": \"a\"}\n");
  std::ostringstream sink;
  CHECK_THROWS_AS(score_jsonl(bad, sink), InputError);
}

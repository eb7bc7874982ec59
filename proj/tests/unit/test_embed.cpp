#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "cliq/embed.hpp"
#include "cliq/error.hpp"
#include "fakes.hpp"

using namespace cliq;
using nlohmann::json;

namespace {

// Embedding server stub: vector [length, 1, 0] per input, returned in
// reverse order with explicit indices.
HttpResponse fake_embeddings(const std::string&, const std::string& body) {
  const auto req = json::parse(body);
  json data = json::array();
  const auto& inputs = req["input"];
  for (std::size_t i = inputs.size(); i-- > 0;) {
    const auto len = static_cast<double>(inputs[i].get<std::string>().size());
    data.push_back({{"index", i}, {"embedding", {len, 1.0, 0.0}}});
  }
  return HttpResponse{200, json{{"data", data}}.dump(), ""};
}

EmbeddingBackendConfig remote_config() {
  EmbeddingBackendConfig cfg;
  cfg.kind = EmbeddingBackendKind::kRemoteApi;
  cfg.base_url = "http://embed.invalid/v1";
  cfg.batch_size = 2;
  cfg.max_in_flight = 3;
  cfg.retry.max_attempts = 2;
  return cfg;
}

}  // namespace

TEST_CASE("hash features cover words and trigrams") {
  const auto f = hash_features("Hi  There");
  CHECK(std::find(f.begin(), f.end(), "w:hi") != f.end());
  CHECK(std::find(f.begin(), f.end(), "w:there") != f.end());
  CHECK(std::find(f.begin(), f.end(), "c:i t") != f.end());
  CHECK(hash_features("").empty());
  CHECK(hash_features("ab").size() == 1);  // one word, no trigram
}

TEST_CASE("local embeddings are unit norm, deterministic and seed dependent") {
  const std::vector<std::string> texts{"Explain recursion", "Bake bread", "", "!!!",
                                       "Explain recursion"};
  const auto a = embed_local(texts, 64, 1);
  const auto b = embed_local(texts, 64, 1);
  const auto c = embed_local(texts, 64, 2);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(rows_unit_norm(a));
  CHECK(a(2, 0) == 1.0);  // empty text -> e1
  CHECK(cosine_similarity(a.row(0), a.row(4)) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a.row(0), a.row(1)) < 0.9);
}

TEST_CASE("similar texts embed closer than unrelated ones") {
  const std::vector<std::string> texts{"How do I bake sourdough bread at home?",
                                       "How can I bake sourdough bread at home quickly?",
                                       "Prove that the square root of two is irrational."};
  const auto e = embed_local(texts, 256, 0);
  CHECK(cosine_similarity(e.row(0), e.row(1)) > cosine_similarity(e.row(0), e.row(2)));
}

TEST_CASE("local embedding input errors") {
  CHECK_THROWS_AS(embed_local({}, 8, 0), InputError);
  const std::vector<std::string> one{"x"};
  CHECK_THROWS_AS(embed_local(one, 1, 0), InputError);
}

TEST_CASE("utf8 truncation never splits a code point") {
  CHECK(truncate_utf8("héllo", 2) == "hé");
  CHECK(truncate_utf8("日本語", 1) == "日");
  CHECK(truncate_utf8("abc", 10) == "abc");
  CHECK(truncate_utf8("abc", 0).empty());
}

TEST_CASE("cosine similarity clamps and checks dimensions") {
  std::vector<double> a{1.0, 0.0}, b{1.0000001, 0.0}, c{1.0};
  CHECK(cosine_similarity(a, b) == 1.0);
  CHECK_THROWS_AS(cosine_similarity(a, c), InputError);
}

TEST_CASE("backend names") {
  CHECK(parse_embedding_backend("local_hash") == EmbeddingBackendKind::kLocalHash);
  CHECK(parse_embedding_backend("remote_api") == EmbeddingBackendKind::kRemoteApi);
  CHECK(to_string(EmbeddingBackendKind::kRemoteApi) == "remote_api");
  CHECK_THROWS_AS(parse_embedding_backend("bert"), InputError);
}

TEST_CASE("remote embedding keeps input order across concurrent batches") {
  testing::ScriptedTransport t;
  t.on_success = fake_embeddings;
  testing::VirtualClock clock;
  std::vector<std::string> texts;
  for (int i = 0; i < 9; ++i) texts.push_back(std::string(static_cast<std::size_t>(i + 1), 'x'));
  const auto out = embed_remote(texts, remote_config(), t, clock.sleeper());
  CHECK(out.requests == 5);
  CHECK(t.requests() == 5);
  REQUIRE(out.matrix.rows() == 9);
  CHECK(rows_unit_norm(out.matrix));
  for (std::size_t i = 0; i < 9; ++i) {
    const double len = static_cast<double>(i + 1);
    CHECK(out.matrix(i, 0) == doctest::Approx(len / std::sqrt(len * len + 1.0)));
  }
  for (const auto& p : t.paths()) CHECK(p == "/embeddings");
}

TEST_CASE("remote embedding replaces zero vectors and reports them") {
  testing::ScriptedTransport t;
  t.success_body = R"({"data":[{"index":0,"embedding":[0,0,0]},{"index":1,"embedding":[0,2,0]}]})";
  auto cfg = remote_config();
  std::vector<std::string> warnings;
  const std::vector<std::string> texts{"a", "b"};
  const auto m = embed_texts(texts, cfg, &t, testing::VirtualClock{}.sleeper(), &warnings);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(1, 1) == 1.0);
  CHECK(warnings.size() == 1);
}

TEST_CASE("remote embedding errors surface as upstream errors") {
  testing::VirtualClock clock;
  const std::vector<std::string> texts{"a", "b"};
  auto cfg = remote_config();

  testing::ScriptedTransport missing;
  missing.success_body = R"({"data":[{"index":0,"embedding":[1,0]}]})";
  CHECK_THROWS_AS(embed_remote(texts, cfg, missing, clock.sleeper()), UpstreamError);

  testing::ScriptedTransport ragged;
  ragged.success_body = R"({"data":[{"index":0,"embedding":[1,0]},{"index":1,"embedding":[1]}]})";
  CHECK_THROWS_AS(embed_remote(texts, cfg, ragged, clock.sleeper()), UpstreamError);

  testing::ScriptedTransport garbage;
  garbage.success_body = "<html>";
  CHECK_THROWS_AS(embed_remote(texts, cfg, garbage, clock.sleeper()), UpstreamError);

  testing::ScriptedTransport down;
  down.failures = 100;
  down.fail_status = 0;
  CHECK_THROWS_AS(embed_remote(texts, cfg, down, clock.sleeper()), UpstreamError);
  CHECK(down.requests() == cfg.retry.max_attempts);
}

TEST_CASE("embed_texts validates its configuration") {
  const std::vector<std::string> texts{"a"};
  auto cfg = remote_config();
  CHECK_THROWS_AS(embed_texts(texts, cfg, nullptr, real_sleeper()), InputError);
  cfg.base_url.clear();
  testing::ScriptedTransport t;
  CHECK_THROWS_AS(embed_texts(texts, cfg, &t, real_sleeper()), InputError);
}

TEST_CASE("embed_texts truncates before embedding") {
  EmbeddingBackendConfig cfg;
  cfg.dim = 32;
  cfg.max_text_length = 5;
  const std::vector<std::string> long_text{"abcdefghij"}, short_text{"abcde"};
  CHECK(embed_texts(long_text, cfg, nullptr, real_sleeper()) ==
        embed_texts(short_text, cfg, nullptr, real_sleeper()));
}

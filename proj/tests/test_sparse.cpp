#include <cmath>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "synorm/error.hpp"

using namespace synorm;
using namespace synorm::testing;

TEST_CASE("character n-grams by code point") {
  CHECK(char_ngrams("abc", 1, 2) == std::vector<std::string>{"a", "b", "c", "ab", "bc"});
  CHECK(char_ngrams("\xC3\xA9t", 2, 2) == std::vector<std::string>{"\xC3\xA9t"});
  CHECK(char_ngrams("a", 2, 3).empty());
}

TEST_CASE("two-document worked example") {
  Dictionary d;
  d.add("ab", ConceptId("X"));
  d.add("bc", ConceptId("Y"));
  const auto m = fit_tfidf(d);
  CHECK(m.num_features() == 5);
  CHECK(m.ngram(0) == "a");
  CHECK(m.ngram(1) == "ab");
  CHECK(m.idf(m.find("a")) == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-15));
  CHECK(m.idf(m.find("b")) == doctest::Approx(1.0).epsilon(1e-15));
  const auto v = m.encode("ab");
  REQUIRE(v.nnz() == 3);
  for (double x : v.values) CHECK(x > 0.0);
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.find("zz") == -1);
  CHECK(m.encode("zz").empty());
}

TEST_CASE("encoding matches the brute force oracle") {
  std::mt19937_64 rng(17);
  const std::string alphabet = "abcde \xC3\xA9";
  auto random_text = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng() % 6;
      s += c == 5 ? std::string("\xC3\xA9") : std::string(1, alphabet[c]);
    }
    return s;
  };
  Dictionary d;
  std::vector<std::string> docs;
  for (int i = 0; i < 40; ++i) {
    const auto s = random_text(3 + rng() % 10);
    if (d.add(s, ConceptId("C" + std::to_string(i)))) docs.push_back(s);
  }
  for (bool norm : {true, false}) {
    TfIdfOptions opts;
    opts.l2_normalize = norm;
    const auto model = fit_tfidf(d, opts);
    const BruteTfIdf oracle(docs, 1, 2, norm);
    for (int q = 0; q < 50; ++q) {
      const auto text = random_text(1 + rng() % 12);
      const auto got = model.encode(text);
      const auto want = oracle.encode(text);
      REQUIRE(got.nnz() == want.size());
      for (std::size_t i = 0; i < got.nnz(); ++i) {
        const auto& g = model.ngram(got.indices[i]);
        REQUIRE(want.count(g));
        CHECK(std::abs(got.values[i] - want.at(g)) < 1e-12);
      }
    }
  }
}

TEST_CASE("sparse score equals a naive double loop") {
  const Dictionary d = make_dictionary({{"renal failure", "C1"}, {"heart failure", "C2"}});
  const auto m = fit_tfidf(d);
  const auto a = m.encode("renal failure");
  const auto b = m.encode("heart failure");
  CHECK(sparse_score(a, b) == doctest::Approx(naive_sparse(a, b)).epsilon(1e-15));
  CHECK(sparse_score(a, a) == doctest::Approx(1.0));
  CHECK(sparse_score(a, SparseVector{}) == 0.0);
}

TEST_CASE("model save and load round trip") {
  const Dictionary d = make_dictionary({{"renal failure", "C1"}, {"\xC3\xA9tat", "C2"}});
  const auto m = fit_tfidf(d);
  std::ostringstream out;
  m.save(out);
  std::istringstream in(out.str());
  const auto back = TfIdfModel::load(in, "mem");
  CHECK(back == m);
  CHECK(back.encode("renal") == m.encode("renal"));
  std::istringstream bad("garbage\n");
  CHECK_THROWS_AS(TfIdfModel::load(bad, "mem"), Error);
}

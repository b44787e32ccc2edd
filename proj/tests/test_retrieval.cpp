#include <map>

#include "doctest.h"
#include "support.hpp"
#include "synorm/error.hpp"

using namespace synorm;
using namespace synorm::testing;

namespace {

// Fixed vectors per text; lets a test dictate the dense ranking.
class LookupEncoder final : public DenseEncoder {
 public:
  explicit LookupEncoder(std::map<std::string, DenseVector> table, std::size_t dim)
      : table_(std::move(table)), dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  DenseVector encode(std::string_view text) const override {
    const auto it = table_.find(std::string(text));
    return it == table_.end() ? DenseVector(dim_, 0.0) : it->second;
  }
  ForwardState forward(std::string_view text) const override {
    return ForwardState{0, encode(text), {}, {}};
  }
  void backward(const ForwardState&, std::span<const double>, Gradients&) const override {}
  std::vector<ParamTensor> parameters() override { return {}; }
  std::uint64_t version() const override { return 0; }
  void mark_updated() override {}

 private:
  std::map<std::string, DenseVector> table_;
  std::size_t dim_;
};

Dictionary letters() {
  return make_dictionary({{"aa", "A"}, {"bb", "B"}, {"cc", "C"}, {"dd", "D"}, {"ee", "E"},
                          {"ff", "F"}});
}

}  // namespace

TEST_CASE("select_top agrees with a full sort, ties included") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 60);
    for (double& x : s) x = static_cast<double>(rng() % 7);
    const std::size_t j = rng() % (s.size() + 3);
    CHECK(select_top(s, j) == oracle_top(s, j));
  }
  CHECK(select_top(std::vector<double>{1.0, 2.0}, 0).empty());
}

TEST_CASE("top-k with identical dense vectors returns the lowest ids") {
  DenseMatrix m(6, 2);
  for (SynonymId i = 0; i < 6; ++i) m.row(i)[0] = 0.5;
  const std::vector<double> q{1.0, 0.0};
  CHECK(topk_dense(q, m, 3) == std::vector<SynonymId>{0, 1, 2});
  CHECK(topk_dense(q, m, 0).empty());
}

TEST_CASE("a dictionary name retrieves itself first") {
  const Dictionary d = make_dictionary({{"renal failure", "C1"}, {"heart failure", "C2"},
                                        {"renal cyst", "C3"}});
  const auto tfidf = fit_tfidf(d);
  const SynonymIndex index(d, tfidf);
  CHECK(topk_sparse(tfidf.encode("heart failure"), index.sparse(), 1) ==
        std::vector<SynonymId>{1});
}

TEST_CASE("refill example with k = 4") {
  const Dictionary d = letters();
  const auto tfidf = fit_tfidf(d);
  SynonymIndex index(d, tfidf);
  const LookupEncoder enc({{"aa", {3.0}}, {"bb", {0.0}}, {"cc", {-1.0}}, {"dd", {-1.0}},
                           {"ee", {2.0}}, {"ff", {1.0}}},
                          1);
  index.refresh_dense(enc);
  MentionRepr m{tfidf.encode("aa bb"), {1.0}};
  const auto set = compose_candidates(m, index, 4, 0.5);
  CHECK(set.ids() == std::vector<SynonymId>{0, 1, 4, 5});
  CHECK(set.candidates[0].source == CandidateSource::kSparse);
  CHECK(set.candidates[1].source == CandidateSource::kSparse);
  CHECK(set.candidates[2].source == CandidateSource::kDense);
  CHECK(set.candidates[3].dense_score == 1.0);

  const std::vector<SynonymId> drop{4};
  CHECK(compose_candidates(m, index, 4, 0.5, drop).ids() == std::vector<SynonymId>{0, 1, 5, 2});

  CHECK(compose_candidates(m, index, 10, 0.5).size() == 6);
  CHECK(compose_candidates(m, index, 4, 1.0).ids() == std::vector<SynonymId>{0, 4, 5, 1});
}

TEST_CASE("slot arithmetic") {
  CHECK(sparse_slots(20, 0.5) == 10);
  CHECK(sparse_slots(20, 0.0) == 20);
  CHECK(sparse_slots(20, 1.0) == 0);
  CHECK(sparse_slots(5, 0.5) == 3);
}

TEST_CASE("composition invariants on random instances") {
  std::mt19937_64 rng(31);
  Dictionary d;
  for (int i = 0; i < 300; ++i) {
    std::string s;
    for (int c = 0; c < 4 + static_cast<int>(rng() % 6); ++c) s += static_cast<char>('a' + rng() % 8);
    d.add(s, ConceptId("C" + std::to_string(i % 90)));
  }
  const auto tfidf = fit_tfidf(d);
  SynonymIndex index(d, tfidf);
  HashedNgramEncoder enc(EncoderConfig{.dim = 8, .buckets = 512, .seed = 1, .init_scale = 1.0});
  index.refresh_dense(enc);
  for (int q = 0; q < 40; ++q) {
    const auto m = represent(d.name(rng() % d.size()), tfidf, enc);
    for (std::size_t k : {1, 4, 20}) {
      for (double alpha : {0.0, 0.3, 0.5, 1.0}) {
        const auto set = compose_candidates(m, index, k, alpha);
        const auto ids = set.ids();
        REQUIRE(ids.size() == k);
        CHECK(std::set<SynonymId>(ids.begin(), ids.end()).size() == k);
        const std::size_t ns = sparse_slots(k, alpha);
        const auto sparse_top = topk_sparse(m.sparse, index.sparse(), ns);
        CHECK(std::vector<SynonymId>(ids.begin(), ids.begin() + ns) == sparse_top);
        const auto dense_rank = topk_dense(m.dense, index.dense(), d.size());
        std::size_t pos = 0;
        for (std::size_t i = ns; i < k; ++i) {
          while (std::find(sparse_top.begin(), sparse_top.end(), dense_rank[pos]) != sparse_top.end()) ++pos;
          CHECK(ids[i] == dense_rank[pos]);
          ++pos;
        }
      }
    }
  }
}

TEST_CASE("sparse-only candidates do not depend on the encoder") {
  const Dictionary d = make_dictionary({{"renal failure", "C1"}, {"heart failure", "C2"},
                                        {"renal cyst", "C3"}, {"lung cancer", "C4"}});
  const auto tfidf = fit_tfidf(d);
  SynonymIndex index(d, tfidf);
  HashedNgramEncoder a(EncoderConfig{.dim = 4, .buckets = 64, .seed = 1});
  HashedNgramEncoder b(EncoderConfig{.dim = 4, .buckets = 64, .seed = 99, .init_scale = 3.0});
  index.refresh_dense(a);
  const auto s1 = compose_candidates(represent("renal", tfidf, a), index, 3, 0.0).ids();
  index.refresh_dense(b);
  const auto s2 = compose_candidates(represent("renal", tfidf, b), index, 3, 0.0).ids();
  CHECK(s1 == s2);
}

TEST_CASE("exact inference matches a full scan") {
  std::mt19937_64 rng(41);
  Dictionary d;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (int c = 0; c < 5; ++c) s += static_cast<char>('a' + rng() % 6);
    d.add(s, ConceptId("C" + std::to_string(i % 50)));
  }
  const auto tfidf = fit_tfidf(d);
  SynonymIndex index(d, tfidf);
  HashedNgramEncoder enc(EncoderConfig{.dim = 6, .buckets = 256, .seed = 2, .init_scale = 1.0});
  index.refresh_dense(enc);
  const HybridWeight w{1.7};
  for (int q = 0; q < 30; ++q) {
    std::string s;
    for (int c = 0; c < 6; ++c) s += static_cast<char>('a' + rng() % 6);
    const auto m = represent(s, tfidf, enc);
    std::vector<double> full(d.size());
    for (SynonymId i = 0; i < d.size(); ++i) {
      full[i] = dense_score(m.dense, index.dense().row(i)) +
                w.lambda * naive_sparse(m.sparse, index.sparse().row(i));
    }
    const auto r = mips_infer(m, index, w, 5);
    const auto want = oracle_top(full, 5);
    CHECK(r.top == want);
    CHECK(r.predicted == d.cui(want[0]));
    CHECK(mips_infer(m, index, w, 1).top[0] == r.top[0]);
  }
  Dictionary empty;
  const SynonymIndex none(empty, tfidf);
  CHECK_THROWS_AS(mips_infer(represent("x", tfidf, enc), none, w, 1), EmptyDictionaryError);
}

TEST_CASE("zeroed dense weights leave the sparse self-match on top") {
  const Dictionary d = make_dictionary({{"renal failure", "C1"}, {"heart failure", "C2"}});
  const auto tfidf = fit_tfidf(d);
  SynonymIndex index(d, tfidf);
  HashedNgramEncoder enc(EncoderConfig{.dim = 4, .buckets = 64});
  for (double& x : enc.weights()) x = 0.0;
  enc.mark_updated();
  index.refresh_dense(enc);
  const auto r = mips_infer(represent("heart failure", tfidf, enc), index, HybridWeight{10.0}, 1);
  CHECK(r.predicted == ConceptId("C2"));
}

TEST_CASE("concept ranking and recall") {
  const Dictionary d = make_dictionary({{"aa", "X"}, {"bb", "X"}, {"cc", "Y"}, {"dd", "Z"}});
  const std::vector<double> scores{0.9, 0.8, 0.7, 0.95};
  const auto hits = rank_concepts(scores, d, 5);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].cui == ConceptId("Z"));
  CHECK(hits[1].cui == ConceptId("X"));
  CHECK(hits[1].synonym == 0);
  CHECK(hits[2].cui == ConceptId("Y"));

  const std::vector<std::vector<SynonymId>> lists{{0}, {2}, {3}, {1, 2}};
  const std::vector<std::vector<ConceptId>> gold{
      {ConceptId("X")}, {ConceptId("Y")}, {ConceptId("X")}, {ConceptId("Y")}};
  CHECK(recall_at_k(lists, gold, d) == doctest::Approx(0.75));
}

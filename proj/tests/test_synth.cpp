#include <set>

#include "doctest.h"
#include "support.hpp"
#include "synorm/error.hpp"
#include "synorm/eval.hpp"
#include "synorm/synth.hpp"

using namespace synorm;
using namespace synorm::testing;

TEST_CASE("variation parsing") {
  CHECK(Variation::parse("identity").identity());
  const auto v = Variation::parse("typo,reorder");
  CHECK(v.typo);
  CHECK(v.reorder);
  CHECK_FALSE(v.suffix);
  CHECK(Variation::parse(v.to_string()).to_string() == v.to_string());
  CHECK_THROWS_AS(Variation::parse("typo,nonsense"), ConfigError);
}

TEST_CASE("generation is deterministic in the seed") {
  SynthSpec spec;
  spec.n_cuis = 40;
  spec.n_train = 60;
  spec.n_test = 30;
  spec.variation = Variation::parse("typo,suffix,reorder");
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.dictionary.size() == b.dictionary.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].text == b.train[i].text);
  spec.seed = 1;
  const auto c = generate_synthetic(spec);
  bool differs = false;
  for (std::size_t i = 0; i < a.train.size(); ++i) differs |= a.train[i].text != c.train[i].text;
  CHECK(differs);
}

TEST_CASE("generated data is consistent") {
  SynthSpec spec;
  spec.n_cuis = 50;
  spec.n_train = 100;
  spec.n_test = 40;
  spec.variation = Variation::parse("typo,suffix,reorder");
  const auto data = generate_synthetic(spec);
  CHECK(data.dictionary.size() == 50 * spec.syns_per_cui);
  CHECK(data.train.size() == 100);
  CHECK(data.test.size() == 40);
  std::set<std::string> cuis;
  std::set<std::pair<std::string, std::string>> names;
  for (const auto& l : data.dictionary) {
    cuis.insert(l.cui);
    names.insert({l.text, l.cui});
  }
  CHECK(cuis.size() == 50);
  std::set<std::string> train_text;
  for (const auto& l : data.train) {
    CHECK(cuis.count(l.cui));
    CHECK_FALSE(names.count({l.text, l.cui}));
    train_text.insert(l.text);
  }
  for (const auto& l : data.test) {
    CHECK(cuis.count(l.cui));
    CHECK_FALSE(train_text.count(l.text));
  }
}

TEST_CASE("identity mentions are solved by the sparse model alone") {
  SynthSpec spec;
  spec.n_cuis = 60;
  spec.n_train = 50;
  spec.n_test = 50;
  spec.variation = Variation::parse("identity");
  const auto data = generate_synthetic(spec);
  Dictionary d;
  for (const auto& l : data.dictionary) d.add(normalize_text(l.text), ConceptId(l.cui));
  const auto tfidf = fit_tfidf(d);
  SynonymIndex index(d, tfidf);
  HashedNgramEncoder enc(EncoderConfig{.dim = 4, .buckets = 64});
  for (double& x : enc.weights()) x = 0.0;
  enc.mark_updated();
  index.refresh_dense(enc);
  std::vector<MentionRecord> mentions;
  for (const auto& l : data.test) mentions.push_back(preprocess_mention(l.text, {ConceptId(l.cui)}, {}));
  const auto r = evaluate(index, tfidf, enc, HybridWeight{}, mentions, {1});
  CHECK(r.acc_at.at(1) == 1.0);
}

TEST_CASE("written files load back") {
  SynthSpec spec;
  spec.n_cuis = 10;
  spec.n_train = 10;
  spec.n_test = 5;
  const auto dir = temp_dir("synth");
  write_synthetic(generate_synthetic(spec), dir);
  CHECK(load_dictionary(dir / "dictionary.txt").size() == 10 * spec.syns_per_cui);
  CHECK(load_mentions(dir / "train.txt", {}).mentions.size() == 10);
  CHECK(load_mentions(dir / "test.txt", {}).mentions.size() == 5);
  std::filesystem::remove_all(dir);
}

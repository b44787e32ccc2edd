#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "synorm/corpus.hpp"
#include "synorm/dense_encoder.hpp"
#include "synorm/retrieval.hpp"
#include "synorm/sparse_encoder.hpp"
#include "synorm/training.hpp"

namespace synorm::testing {

inline Dictionary make_dictionary(const std::vector<std::pair<std::string, std::string>>& entries) {
  Dictionary d;
  for (const auto& [name, cui] : entries) d.add(normalize_text(name), ConceptId(cui));
  return d;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("synorm-" + tag + "-" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// tf-idf written from the definition: count n-grams with a std::map, no
// shared code with the model beyond char_ngrams' code-point slicing, which is
// re-derived here too.
struct BruteTfIdf {
  std::size_t lo = 1, hi = 2;
  bool normalize = true;
  std::map<std::string, double> idf;

  static std::vector<std::string> grams(const std::string& text, std::size_t lo, std::size_t hi) {
    std::vector<std::string> cps;
    for (std::size_t i = 0; i < text.size();) {
      const unsigned char c = static_cast<unsigned char>(text[i]);
      std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
      cps.push_back(text.substr(i, len));
      i += len;
    }
    std::vector<std::string> out;
    for (std::size_t n = lo; n <= hi; ++n) {
      for (std::size_t i = 0; i + n <= cps.size(); ++i) {
        std::string g;
        for (std::size_t j = 0; j < n; ++j) g += cps[i + j];
        out.push_back(g);
      }
    }
    return out;
  }

  BruteTfIdf(const std::vector<std::string>& docs, std::size_t lo_, std::size_t hi_, bool norm)
      : lo(lo_), hi(hi_), normalize(norm) {
    std::map<std::string, std::size_t> df;
    for (const auto& d : docs) {
      const auto g = grams(d, lo, hi);
      for (const auto& u : std::set<std::string>(g.begin(), g.end())) ++df[u];
    }
    for (const auto& [g, n] : df) {
      idf[g] = std::log((1.0 + static_cast<double>(docs.size())) / (1.0 + static_cast<double>(n))) + 1.0;
    }
  }

  // n-gram -> weight
  std::map<std::string, double> encode(const std::string& text) const {
    std::map<std::string, double> tf;
    for (const auto& g : grams(text, lo, hi)) {
      if (idf.count(g)) tf[g] += 1.0;
    }
    double norm = 0.0;
    for (auto& [g, v] : tf) {
      v *= idf.at(g);
      norm += v * v;
    }
    if (normalize && norm > 0.0) {
      for (auto& [g, v] : tf) v /= std::sqrt(norm);
    }
    return tf;
  }
};

// Full sort with the documented tie-break: score descending, id ascending.
inline std::vector<SynonymId> oracle_top(const std::vector<double>& scores, std::size_t j) {
  std::vector<SynonymId> ids(scores.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<SynonymId>(i);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](SynonymId a, SynonymId b) { return scores[a] > scores[b]; });
  ids.resize(std::min(j, ids.size()));
  return ids;
}

inline double naive_sparse(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.nnz(); ++i) {
    for (std::size_t j = 0; j < b.nnz(); ++j) {
      if (a.indices[i] == b.indices[j]) s += a.values[i] * b.values[j];
    }
  }
  return s;
}

// A 5-concept instance small enough for exhaustive finite differences.
struct ToyProblem {
  Dictionary dict;
  TfIdfModel tfidf;
  HashedNgramEncoder encoder;
  HybridWeight weight{0.7};
  std::vector<TrainingExample> examples;
  std::vector<CandidateSet> sets;

  explicit ToyProblem(std::size_t k = 5, double alpha = 0.4)
      : dict(make_dictionary({{"renal failure", "C1"},
                              {"kidney failure", "C1"},
                              {"renal insufficiency", "C1"},
                              {"heart failure", "C2"},
                              {"cardiac failure", "C2"},
                              {"heart attack", "C3"},
                              {"myocardial infarction", "C3"},
                              {"lung cancer", "C4"},
                              {"pulmonary carcinoma", "C4"},
                              {"liver cirrhosis", "C5"},
                              {"hepatic fibrosis", "C5"}})),
        tfidf(fit_tfidf(dict)),
        encoder(EncoderConfig{.dim = 6, .buckets = 97, .ngram_order = 3, .seed = 3,
                              .max_chars = 100, .init_scale = 0.8}) {
    std::vector<MentionRecord> mentions;
    const std::vector<std::pair<std::string, std::vector<std::string>>> raw = {
        {"kidney insufficiency", {"C1"}},
        {"cardiac arrest", {"C2", "C3"}},
        {"carcinoma of lung", {"C4"}},
        {"fibrosis liver", {"C5"}},
    };
    for (const auto& [text, gold] : raw) {
      std::vector<ConceptId> ids;
      for (const auto& g : gold) ids.emplace_back(g);
      mentions.push_back(preprocess_mention(text, ids, PreprocessOptions{}));
    }
    examples = make_examples(mentions, tfidf);
    SynonymIndex index(dict, tfidf);
    index.refresh_dense(encoder);
    sets = compose_all(examples, index, encoder, k, alpha, 1);
  }

  std::vector<const TrainingExample*> batch() const {
    std::vector<const TrainingExample*> b;
    for (const auto& e : examples) b.push_back(&e);
    return b;
  }
  std::vector<const CandidateSet*> batch_sets() const {
    std::vector<const CandidateSet*> b;
    for (const auto& s : sets) b.push_back(&s);
    return b;
  }
};

struct GradientAudit {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;
};

inline double rel_error(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-7});
  return std::abs(a - n) / denom;
}

// Compares batch_loss gradients with central differences over every W and b
// coordinate, every touched E row (up to `max_rows`), and lambda.
inline GradientAudit audit_gradients(ToyProblem& toy, LossKind kind, double eps = 1e-5,
                                     std::size_t max_rows = 1000) {
  SynonymIndex index(toy.dict, toy.tfidf);
  const auto batch = toy.batch();
  const auto sets = toy.batch_sets();

  Gradients grads = toy.encoder.make_gradients();
  batch_loss(kind, batch, sets, index, toy.encoder, toy.weight, &grads);

  const auto loss_at = [&]() {
    return batch_loss(kind, batch, sets, index, toy.encoder, toy.weight, nullptr).loss;
  };

  GradientAudit audit;
  const auto check = [&](double& param, double analytic, const std::string& label) {
    const double saved = param;
    param = saved + eps;
    toy.encoder.mark_updated();
    const double up = loss_at();
    param = saved - eps;
    toy.encoder.mark_updated();
    const double down = loss_at();
    param = saved;
    toy.encoder.mark_updated();
    const double numeric = (up - down) / (2.0 * eps);
    const double err = rel_error(analytic, numeric);
    ++audit.coordinates;
    if (err > audit.max_rel_error) {
      audit.max_rel_error = err;
      audit.worst = label + " analytic=" + std::to_string(analytic) +
                    " numeric=" + std::to_string(numeric);
    }
  };

  auto params = toy.encoder.parameters();
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t];
    if (p.row_sparse) {
      std::size_t rows = 0;
      for (const auto& [row, values] : grads.tensor(t).touched) {
        if (rows++ >= max_rows) break;
        for (std::size_t c = 0; c < p.cols; ++c) {
          check(p.values[std::size_t{row} * p.cols + c], values[c],
                p.name + "[" + std::to_string(row) + "," + std::to_string(c) + "]");
        }
      }
    } else {
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        check(p.values[i], grads.at(t, i), p.name + "[" + std::to_string(i) + "]");
      }
    }
  }
  check(toy.weight.lambda, grads.lambda, "lambda");
  return audit;
}

}  // namespace synorm::testing

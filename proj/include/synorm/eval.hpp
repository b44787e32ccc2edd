#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "synorm/corpus.hpp"
#include "synorm/dense_encoder.hpp"
#include "synorm/retrieval.hpp"
#include "synorm/scorer.hpp"
#include "synorm/sparse_encoder.hpp"

namespace synorm {

struct ComponentPrediction {
  std::string text;
  std::vector<ConceptId> gold;
  std::vector<ConceptHit> ranked;  // distinct concepts, best first

  // 1-based rank of the first gold concept in `ranked`, if present.
  std::optional<std::size_t> gold_rank() const;
  bool correct_at(std::size_t k) const;
};

struct MentionEvaluation {
  std::string raw;
  bool is_composite = false;
  bool unsplit_fallback = false;
  std::vector<ComponentPrediction> components;

  // AND over components.
  bool correct_at(std::size_t k) const;
};

struct EvalReport {
  std::map<std::size_t, double> acc_at;
  std::vector<MentionEvaluation> mentions;
  std::size_t total = 0;
  std::size_t composite = 0;
  std::size_t unsplit_fallback = 0;

  nlohmann::json to_json() const;
  // One row per component of every mention that is wrong at k:
  // mention, component, gold, predicted cui, predicted synonym, gold rank.
  void write_failures(std::ostream& out, const Dictionary& dict, std::size_t k) const;
};

double acc_at_k(std::span<const MentionEvaluation> mentions, std::size_t k);

ComponentPrediction predict_component(const MentionComponent& comp, const TfIdfModel& tfidf,
                                      const DenseEncoder& encoder, const SynonymIndex& index,
                                      const HybridWeight& w, std::size_t k);

// Runs exact inference for every component and scores Acc@k for each k.
// `index` must have dense rows refreshed for `encoder`. Throws Error when
// `mentions` is empty.
EvalReport evaluate(const SynonymIndex& index, const TfIdfModel& tfidf,
                    const DenseEncoder& encoder, const HybridWeight& w,
                    const std::vector<MentionRecord>& mentions,
                    const std::vector<std::size_t>& ks = {1, 5}, std::size_t threads = 1);

}  // namespace synorm

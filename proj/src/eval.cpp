#include "synorm/eval.hpp"

#include <algorithm>
#include <ostream>

#include "synorm/error.hpp"
#include "synorm/parallel.hpp"

namespace synorm {

std::optional<std::size_t> ComponentPrediction::gold_rank() const {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (std::binary_search(gold.begin(), gold.end(), ranked[i].cui)) return i + 1;
  }
  return std::nullopt;
}

bool ComponentPrediction::correct_at(std::size_t k) const {
  const auto rank = gold_rank();
  return rank && *rank <= k;
}

bool MentionEvaluation::correct_at(std::size_t k) const {
  return !components.empty() &&
         std::all_of(components.begin(), components.end(),
                     [k](const ComponentPrediction& c) { return c.correct_at(k); });
}

double acc_at_k(std::span<const MentionEvaluation> mentions, std::size_t k) {
  if (mentions.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& m : mentions) hits += m.correct_at(k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(mentions.size());
}

ComponentPrediction predict_component(const MentionComponent& comp, const TfIdfModel& tfidf,
                                      const DenseEncoder& encoder, const SynonymIndex& index,
                                      const HybridWeight& w, std::size_t k) {
  if (index.size() == 0) throw EmptyDictionaryError("evaluate");
  ComponentPrediction pred;
  pred.text = comp.text;
  pred.gold = comp.gold;
  const auto scores = hybrid_scores(represent(comp.text, tfidf, encoder), index, w);
  pred.ranked = rank_concepts(scores, index.dictionary(), k);
  return pred;
}

EvalReport evaluate(const SynonymIndex& index, const TfIdfModel& tfidf,
                    const DenseEncoder& encoder, const HybridWeight& w,
                    const std::vector<MentionRecord>& mentions,
                    const std::vector<std::size_t>& ks, std::size_t threads) {
  if (mentions.empty()) throw Error("evaluate: no mentions");
  if (ks.empty()) throw ConfigError("evaluate: no k values");
  const std::size_t depth = *std::max_element(ks.begin(), ks.end());

  EvalReport report;
  report.mentions.resize(mentions.size());
  parallel_for(mentions.size(), threads, [&](std::size_t i) {
    const auto& rec = mentions[i];
    auto& out = report.mentions[i];
    out.raw = rec.raw;
    out.is_composite = rec.is_composite;
    out.unsplit_fallback = rec.unsplit_fallback;
    for (const auto& comp : rec.components) {
      out.components.push_back(predict_component(comp, tfidf, encoder, index, w, depth));
    }
  });
  report.total = mentions.size();
  for (const auto& m : report.mentions) {
    report.composite += m.is_composite ? 1 : 0;
    report.unsplit_fallback += m.unsplit_fallback ? 1 : 0;
  }
  for (std::size_t k : ks) report.acc_at[k] = acc_at_k(report.mentions, k);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [k, v] : acc_at) acc["acc@" + std::to_string(k)] = v;

  nlohmann::json records = nlohmann::json::array();
  for (const auto& m : mentions) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.components) {
      nlohmann::json gold = nlohmann::json::array();
      for (const auto& g : c.gold) gold.push_back(g.str());
      nlohmann::json preds = nlohmann::json::array();
      for (std::size_t r = 0; r < c.ranked.size(); ++r) {
        preds.push_back({{"rank", r + 1},
                         {"cui", c.ranked[r].cui.str()},
                         {"synonym_id", c.ranked[r].synonym},
                         {"score", c.ranked[r].score}});
      }
      const auto rank = c.gold_rank();
      comps.push_back({{"text", c.text},
                       {"gold", gold},
                       {"gold_rank", rank ? nlohmann::json(*rank) : nlohmann::json(nullptr)},
                       {"predictions", preds}});
    }
    nlohmann::json correct = nlohmann::json::object();
    for (const auto& [k, v] : acc_at) correct[std::to_string(k)] = m.correct_at(k);
    records.push_back({{"mention", m.raw},
                       {"composite", m.is_composite},
                       {"unsplit_fallback", m.unsplit_fallback},
                       {"correct", correct},
                       {"components", comps}});
  }
  return {{"acc", acc},
          {"counts",
           {{"total", total}, {"composite", composite}, {"unsplit_fallback", unsplit_fallback}}},
          {"mentions", records}};
}

void EvalReport::write_failures(std::ostream& out, const Dictionary& dict, std::size_t k) const {
  out << "mention\tcomponent\tgold\tpredicted_cui\tpredicted_synonym\tgold_rank\n";
  for (const auto& m : mentions) {
    if (m.correct_at(k)) continue;
    for (const auto& c : m.components) {
      std::string gold;
      for (const auto& g : c.gold) gold += (gold.empty() ? "" : "|") + g.str();
      const auto rank = c.gold_rank();
      out << m.raw << '\t' << c.text << '\t' << gold << '\t'
          << (c.ranked.empty() ? "" : c.ranked.front().cui.str()) << '\t'
          << (c.ranked.empty() ? "" : dict.name(c.ranked.front().synonym)) << '\t'
          << (rank ? std::to_string(*rank) : "-") << '\n';
    }
  }
}

}  // namespace synorm

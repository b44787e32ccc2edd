#include "synorm/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "synorm/error.hpp"
#include "synorm/parallel.hpp"

namespace synorm {

SparseMatrix::SparseMatrix(std::vector<SparseVector> rows, std::size_t num_features)
    : rows_(std::move(rows)), postings_(num_features) {
  for (std::size_t id = 0; id < rows_.size(); ++id) {
    const auto& v = rows_[id];
    for (std::size_t i = 0; i < v.indices.size(); ++i) {
      if (v.indices[i] >= num_features) throw Error("sparse row has out-of-range feature");
      postings_[v.indices[i]].push_back({static_cast<SynonymId>(id), v.values[i]});
    }
  }
}

std::vector<double> SparseMatrix::scores(const SparseVector& query) const {
  std::vector<double> out(rows_.size(), 0.0);
  for (std::size_t i = 0; i < query.indices.size(); ++i) {
    const auto f = query.indices[i];
    if (f >= postings_.size()) continue;
    const double q = query.values[i];
    for (const auto& p : postings_[f]) out[p.id] += q * p.value;
  }
  return out;
}

std::vector<double> DenseMatrix::scores(std::span<const double> query) const {
  if (query.size() != dim_) throw Error("dense query has wrong dimension");
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = data_.data() + r * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += query[j] * row[j];
    out[r] = s;
  }
  return out;
}

SynonymIndex::SynonymIndex(const Dictionary& dict, const TfIdfModel& tfidf) : dict_(&dict) {
  std::vector<SparseVector> rows;
  rows.reserve(dict.size());
  for (const auto& e : dict.entries()) rows.push_back(tfidf.encode(e.name));
  sparse_ = SparseMatrix(std::move(rows), tfidf.num_features());
}

void SynonymIndex::refresh_dense(const DenseEncoder& encoder, std::size_t threads) {
  DenseMatrix fresh(dict_->size(), encoder.dim());
  parallel_for(dict_->size(), threads, [&](std::size_t i) {
    const auto v = encoder.encode(dict_->name(static_cast<SynonymId>(i)));
    std::copy(v.begin(), v.end(), fresh.row(static_cast<SynonymId>(i)).begin());
  });
  dense_ = std::move(fresh);
}

MentionRepr represent(std::string_view text, const TfIdfModel& tfidf,
                      const DenseEncoder& encoder) {
  return {tfidf.encode(text), encoder.encode(text)};
}

std::vector<SynonymId> select_top(std::span<const double> scores, std::size_t j) {
  j = std::min(j, scores.size());
  std::vector<SynonymId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), SynonymId{0});
  const auto better = [&](SynonymId a, SynonymId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(j), ids.end(), better);
  ids.resize(j);
  return ids;
}

std::vector<SynonymId> topk_sparse(const SparseVector& mention, const SparseMatrix& dict,
                                   std::size_t j) {
  if (j == 0) return {};
  return select_top(dict.scores(mention), j);
}

std::vector<SynonymId> topk_dense(std::span<const double> mention, const DenseMatrix& dict,
                                  std::size_t j) {
  if (j == 0) return {};
  return select_top(dict.scores(mention), j);
}

const char* to_string(CandidateSource s) {
  return s == CandidateSource::kSparse ? "sparse" : "dense";
}

std::vector<SynonymId> CandidateSet::ids() const {
  std::vector<SynonymId> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.id);
  return out;
}

std::size_t sparse_slots(std::size_t k, double alpha) {
  const auto dense = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(k)));
  return k - std::min(dense, k);
}

CandidateSet compose_candidates(const MentionRepr& mention, const SynonymIndex& index,
                                std::size_t k, double alpha, std::span<const SynonymId> exclude) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");

  std::unordered_set<SynonymId> taken;
  for (SynonymId id : exclude) {
    if (id < index.size()) taken.insert(id);
  }
  const std::size_t skip = taken.size();

  CandidateSet set;
  set.k = k;
  set.alpha = alpha;
  const std::size_t target = std::min(k, index.size() - skip);
  const std::size_t n_sparse = std::min(sparse_slots(k, alpha), target);

  const auto sparse_scores = index.sparse().scores(mention.sparse);
  const auto dense_scores = index.dense().scores(mention.dense);

  set.candidates.reserve(target);
  for (SynonymId id : select_top(sparse_scores, n_sparse + skip)) {
    if (set.candidates.size() == n_sparse) break;
    if (!taken.insert(id).second) continue;
    set.candidates.push_back({id, CandidateSource::kSparse, sparse_scores[id], dense_scores[id]});
  }
  // The dense ranking covers the whole dictionary, so walking
  // target + n_sparse + skip entries always fills the set.
  for (SynonymId id : select_top(dense_scores, target + n_sparse + skip)) {
    if (set.candidates.size() == target) break;
    if (!taken.insert(id).second) continue;
    set.candidates.push_back({id, CandidateSource::kDense, sparse_scores[id], dense_scores[id]});
  }
  return set;
}

std::vector<double> hybrid_scores(const MentionRepr& mention, const SynonymIndex& index,
                                  const HybridWeight& w) {
  auto sparse = index.sparse().scores(mention.sparse);
  const auto dense = index.dense().scores(mention.dense);
  for (std::size_t i = 0; i < sparse.size(); ++i) sparse[i] = combine_scores(dense[i], sparse[i], w);
  return sparse;
}

InferenceResult mips_infer(const MentionRepr& mention, const SynonymIndex& index,
                           const HybridWeight& w, std::size_t k) {
  if (index.size() == 0) throw EmptyDictionaryError("mips_infer");
  const auto scores = hybrid_scores(mention, index, w);
  InferenceResult out;
  out.top = select_top(scores, std::max<std::size_t>(k, 1));
  out.predicted = index.dictionary().cui(out.top.front());
  out.top.resize(std::min(out.top.size(), k));
  out.scores.reserve(out.top.size());
  for (SynonymId id : out.top) out.scores.push_back(scores[id]);
  return out;
}

std::vector<InferenceResult> mips_infer(const MentionRecord& mention, const TfIdfModel& tfidf,
                                        const DenseEncoder& encoder, const SynonymIndex& index,
                                        const HybridWeight& w, std::size_t k) {
  std::vector<InferenceResult> out;
  out.reserve(mention.components.size());
  for (const auto& comp : mention.components) {
    out.push_back(mips_infer(represent(comp.text, tfidf, encoder), index, w, k));
  }
  return out;
}

std::vector<ConceptHit> rank_concepts(std::span<const double> scores, const Dictionary& dict,
                                      std::size_t k) {
  std::vector<ConceptHit> hits;
  if (k == 0 || scores.empty()) return hits;
  std::size_t depth = std::min(scores.size(), std::max<std::size_t>(4 * k, 16));
  while (true) {
    hits.clear();
    std::unordered_set<ConceptId> seen;
    for (SynonymId id : select_top(scores, depth)) {
      if (!seen.insert(dict.cui(id)).second) continue;
      hits.push_back({dict.cui(id), id, scores[id]});
      if (hits.size() == k) return hits;
    }
    if (depth == scores.size()) return hits;
    depth = std::min(scores.size(), depth * 2);
  }
}

double recall_at_k(std::span<const std::vector<SynonymId>> lists,
                   std::span<const std::vector<ConceptId>> gold, const Dictionary& dict) {
  if (lists.size() != gold.size()) throw Error("recall_at_k: lists/gold size mismatch");
  if (lists.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto& g = gold[i];
    const bool hit = std::any_of(lists[i].begin(), lists[i].end(), [&](SynonymId id) {
      return std::find(g.begin(), g.end(), dict.cui(id)) != g.end();
    });
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

double recall_at_k(std::span<const CandidateSet> sets,
                   std::span<const std::vector<ConceptId>> gold, const Dictionary& dict) {
  std::vector<std::vector<SynonymId>> lists;
  lists.reserve(sets.size());
  for (const auto& s : sets) lists.push_back(s.ids());
  return recall_at_k(lists, gold, dict);
}

}  // namespace synorm

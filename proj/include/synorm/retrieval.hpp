#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "synorm/corpus.hpp"
#include "synorm/dense_encoder.hpp"
#include "synorm/scorer.hpp"
#include "synorm/sparse_encoder.hpp"

namespace synorm {

// Synonym sparse vectors plus an inverted index for query scoring. Scores
// are summed in ascending feature order, matching sparse_score bit for bit.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::vector<SparseVector> rows, std::size_t num_features);

  std::size_t rows() const { return rows_.size(); }
  const SparseVector& row(SynonymId id) const { return rows_[id]; }

  std::vector<double> scores(const SparseVector& query) const;

 private:
  struct Posting {
    SynonymId id;
    double value;
  };
  std::vector<SparseVector> rows_;
  std::vector<std::vector<Posting>> postings_;
};

// Row-major synonym dense vectors.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<double> row(SynonymId id) { return {data_.data() + std::size_t{id} * dim_, dim_}; }
  std::span<const double> row(SynonymId id) const {
    return {data_.data() + std::size_t{id} * dim_, dim_};
  }

  std::vector<double> scores(std::span<const double> query) const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Precomputed representations of every dictionary synonym. Holds a reference
// to the dictionary, which must outlive the index. Dense rows are refreshed
// explicitly (once per epoch in training).
class SynonymIndex {
 public:
  SynonymIndex(const Dictionary& dict, const TfIdfModel& tfidf);

  const Dictionary& dictionary() const { return *dict_; }
  const SparseMatrix& sparse() const { return sparse_; }
  const DenseMatrix& dense() const { return dense_; }
  std::size_t size() const { return dict_->size(); }

  void refresh_dense(const DenseEncoder& encoder, std::size_t threads = 1);

 private:
  const Dictionary* dict_;
  SparseMatrix sparse_;
  DenseMatrix dense_;
};

struct MentionRepr {
  SparseVector sparse;
  DenseVector dense;
};

MentionRepr represent(std::string_view text, const TfIdfModel& tfidf, const DenseEncoder& encoder);

// Ids of the j best scores, descending, ties by ascending id.
std::vector<SynonymId> select_top(std::span<const double> scores, std::size_t j);

std::vector<SynonymId> topk_sparse(const SparseVector& mention, const SparseMatrix& dict,
                                   std::size_t j);
std::vector<SynonymId> topk_dense(std::span<const double> mention, const DenseMatrix& dict,
                                  std::size_t j);

enum class CandidateSource { kSparse, kDense };

const char* to_string(CandidateSource s);

struct Candidate {
  SynonymId id;
  CandidateSource source;
  double sparse_score;
  double dense_score;
};

struct CandidateSet {
  std::size_t k = 0;
  double alpha = 0.0;
  std::vector<Candidate> candidates;

  std::size_t size() const { return candidates.size(); }
  std::vector<SynonymId> ids() const;
};

// k - floor(alpha k) sparse candidates followed by dense candidates; duplicates
// of the sparse block are skipped and the dense ranking is walked further
// until the set holds min(k, |N|) synonyms. Ids in `exclude` are never
// candidates.
CandidateSet compose_candidates(const MentionRepr& mention, const SynonymIndex& index,
                                std::size_t k, double alpha,
                                std::span<const SynonymId> exclude = {});

std::size_t sparse_slots(std::size_t k, double alpha);

// S(m, n) for every synonym.
std::vector<double> hybrid_scores(const MentionRepr& mention, const SynonymIndex& index,
                                  const HybridWeight& w);

struct InferenceResult {
  ConceptId predicted;
  std::vector<SynonymId> top;   // best k synonyms by S
  std::vector<double> scores;   // their scores
};

// Exact maximum inner product search: a full scan over the cached synonym
// representations. Throws EmptyDictionaryError for an empty index.
InferenceResult mips_infer(const MentionRepr& mention, const SynonymIndex& index,
                           const HybridWeight& w, std::size_t k);

std::vector<InferenceResult> mips_infer(const MentionRecord& mention, const TfIdfModel& tfidf,
                                        const DenseEncoder& encoder, const SynonymIndex& index,
                                        const HybridWeight& w, std::size_t k);

struct ConceptHit {
  ConceptId cui;
  SynonymId synonym;     // best-ranked synonym of this concept
  double score;
};

// First k distinct concepts in synonym rank order.
std::vector<ConceptHit> rank_concepts(std::span<const double> scores, const Dictionary& dict,
                                      std::size_t k);

// Fraction of lists containing a synonym whose concept is in the matching
// gold set.
double recall_at_k(std::span<const std::vector<SynonymId>> lists,
                   std::span<const std::vector<ConceptId>> gold, const Dictionary& dict);
double recall_at_k(std::span<const CandidateSet> sets,
                   std::span<const std::vector<ConceptId>> gold, const Dictionary& dict);

}  // namespace synorm

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synorm/corpus.hpp"

namespace synorm {

// Sorted sparse vector. Indices strictly increase; values are positive.
struct SparseVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  bool empty() const { return indices.empty(); }
  std::size_t nnz() const { return indices.size(); }
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

struct TfIdfOptions {
  std::size_t min_order = 1;
  std::size_t max_order = 2;
  bool l2_normalize = true;

  friend bool operator==(const TfIdfOptions&, const TfIdfOptions&) = default;
};

// Character n-gram tf-idf model fitted over dictionary synonyms. Feature
// indices follow lexicographic (byte) order of the n-gram strings, and
// idf = ln((1 + |N|) / (1 + df)) + 1.
class TfIdfModel {
 public:
  TfIdfModel() = default;

  const TfIdfOptions& options() const { return opts_; }
  std::size_t num_features() const { return ngrams_.size(); }
  std::size_t num_documents() const { return num_docs_; }

  const std::string& ngram(std::uint32_t index) const { return ngrams_[index]; }
  double idf(std::uint32_t index) const { return idf_[index]; }
  // Returns -1 when unknown.
  std::int64_t find(std::string_view ngram) const;

  SparseVector encode(std::string_view text) const;

  void save(std::ostream& out) const;
  static TfIdfModel load(std::istream& in, const std::string& source);
  void save(const std::filesystem::path& path) const;
  static TfIdfModel load(const std::filesystem::path& path);

  friend bool operator==(const TfIdfModel&, const TfIdfModel&) = default;
  friend TfIdfModel fit_tfidf(const Dictionary& dict, const TfIdfOptions& opts);

 private:
  TfIdfOptions opts_;
  std::size_t num_docs_ = 0;
  std::vector<std::string> ngrams_;
  std::vector<double> idf_;
  std::map<std::string, std::uint32_t, std::less<>> vocab_;
};

// Character n-grams of `text` (by code point) for orders in [min, max], in
// occurrence order, duplicates kept.
std::vector<std::string> char_ngrams(std::string_view text, std::size_t min_order,
                                     std::size_t max_order);

TfIdfModel fit_tfidf(const Dictionary& dict, const TfIdfOptions& opts = {});

inline SparseVector encode_sparse(std::string_view text, const TfIdfModel& model) {
  return model.encode(text);
}

// Inner product via sorted-index merge.
double sparse_score(const SparseVector& a, const SparseVector& b);

}  // namespace synorm

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace synorm {

// Opaque concept identifier ("MeSH:D007052", "OMIM:217000"). Compared by
// exact string equality after trimming surrounding whitespace.
class ConceptId {
 public:
  ConceptId() = default;
  explicit ConceptId(std::string_view value);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend bool operator==(const ConceptId&, const ConceptId&) = default;
  friend auto operator<=>(const ConceptId&, const ConceptId&) = default;

 private:
  std::string value_;
};

using SynonymId = std::uint32_t;

struct DictionaryEntry {
  SynonymId id;
  std::string name;
  ConceptId cui;
};

// The synonym universe. Synonym ids are 0-based positions and never change
// once assigned; entries can only be appended. Names are stored normalized
// and each (name, cui) pair appears once.
class Dictionary {
 public:
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const DictionaryEntry& operator[](SynonymId id) const { return entries_[id]; }
  const std::vector<DictionaryEntry>& entries() const { return entries_; }

  const std::string& name(SynonymId id) const { return entries_[id].name; }
  const ConceptId& cui(SynonymId id) const { return entries_[id].cui; }

  // Synonym ids whose name equals `name`, ascending. Empty when absent.
  const std::vector<SynonymId>& lookup(const std::string& name) const;

  bool contains(const std::string& name, const ConceptId& cui) const;

  // Appends (name, cui) unless the pair already exists. `name` must already
  // be normalized and non-empty. Returns the new id, or nullopt for a dup.
  std::optional<SynonymId> add(std::string name, ConceptId cui);

  friend bool operator==(const Dictionary& a, const Dictionary& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || a.entries_[i].cui != b.entries_[i].cui) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<DictionaryEntry> entries_;
  std::unordered_map<std::string, std::vector<SynonymId>> index_;
};

// Whole-word substitution map (abbreviation expansions, spelling fixes).
// Keys and values are normalized; keys never map to themselves. Applied in a
// single left-to-right pass, so chains a->b->c are not followed.
class SubstitutionMap {
 public:
  SubstitutionMap() = default;

  // Throws ConfigError if the key maps to itself or normalizes to nothing.
  void insert(std::string_view short_form, std::string_view long_form);

  bool empty() const { return pairs_.empty(); }
  std::size_t size() const { return pairs_.size(); }
  const std::map<std::string, std::string>& pairs() const { return pairs_; }

  // Replaces whole-word matches in a space-tokenized string. Multi-word keys
  // are matched greedily, longest first.
  std::string apply(std::string_view text) const;

 private:
  std::map<std::string, std::string> pairs_;
  std::size_t max_key_tokens_ = 0;
};

struct MentionComponent {
  std::string text;
  std::vector<ConceptId> gold;  // sorted, unique; membership is EQUAL()

  bool is_positive(const ConceptId& cui) const;
};

struct MentionRecord {
  std::string raw;
  std::vector<MentionComponent> components;
  bool is_composite = false;
  // The surface form split into several parts but the gold list did not
  // align with them, so the record was kept whole with every gold id.
  bool unsplit_fallback = false;
};

struct PreprocessOptions {
  const SubstitutionMap* abbreviations = nullptr;
  const SubstitutionMap* spelling = nullptr;
  std::size_t head_words = 1;
  bool split_composites = true;
};

// Lowercase, punctuation to space, collapse whitespace, expand abbreviations,
// fix spelling, trim. Throws EmptyMentionError if nothing remains.
std::string normalize_text(std::string_view raw, const SubstitutionMap& abbrev,
                           const SubstitutionMap& spelling);
std::string normalize_text(std::string_view raw);

// Splits "a and b t", "a, b, and c t", "a/b t" into one string per conjunct,
// each followed by the shared head t (the last `head_words` tokens). A
// conjunct that already ends with the head is kept as is. Accepts either
// normalized text or text still carrying ',' and '/'. Returns {text} when the
// pattern does not apply.
std::vector<std::string> split_composite(std::string_view text, std::size_t head_words = 1);

// Normalized parts of a possibly composite mention; empty parts are dropped.
std::vector<std::string> composite_parts(std::string_view raw, const PreprocessOptions& opts);

// Runs the full mention pipeline: composite split on the lightly cleaned
// surface form, then normalize_text per part, then gold alignment.
MentionRecord preprocess_mention(std::string_view raw, const std::vector<ConceptId>& gold,
                                 const PreprocessOptions& opts);

Dictionary load_dictionary(const std::filesystem::path& path);
Dictionary read_dictionary(std::istream& in, const std::string& source);

// Canonical form: one `CUI||name` line per entry in synonym-id order.
void write_dictionary(std::ostream& out, const Dictionary& dict);
void save_dictionary(const std::filesystem::path& path, const Dictionary& dict);

struct MentionSet {
  std::vector<MentionRecord> mentions;
  std::size_t skipped_empty = 0;
};

// Query files hold `raw_mention||CUI[|CUI...]` lines.
MentionSet load_mentions(const std::filesystem::path& path, const PreprocessOptions& opts);
MentionSet read_mentions(std::istream& in, const std::string& source,
                         const PreprocessOptions& opts);

// Two-column TSV, `short<TAB>long`. Blank lines and lines starting with '#'
// are ignored.
SubstitutionMap load_substitution_map(const std::filesystem::path& path);
SubstitutionMap read_substitution_map(std::istream& in, const std::string& source);

// Appends every single-gold training component that is not yet present as a
// (text, cui) pair. Existing ids are untouched.
Dictionary merge_train_to_dictionary(const Dictionary& dict,
                                     const std::vector<MentionRecord>& train);

}  // namespace synorm

template <>
struct std::hash<synorm::ConceptId> {
  std::size_t operator()(const synorm::ConceptId& c) const noexcept {
    return std::hash<std::string>{}(c.str());
  }
};

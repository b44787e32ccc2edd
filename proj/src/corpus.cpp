#include "synorm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "synorm/error.hpp"
#include "synorm/utf8.hpp"

namespace synorm {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// Lowercases and maps punctuation/whitespace to single spaces. Characters in
// `keep` survive as standalone tokens.
std::string clean(std::string_view raw, std::u32string_view keep) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : utf8::decode(raw)) {
    cp = utf8::to_lower(cp);
    const bool kept = keep.find(cp) != std::u32string_view::npos;
    if (!kept && (utf8::is_space(cp) || utf8::is_punctuation(cp))) {
      pending_space = true;
      continue;
    }
    if (kept) pending_space = true;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = kept;
    utf8::append(out, cp);
  }
  return out;
}

std::string strip_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

ConceptId::ConceptId(std::string_view value) : value_(trim(value)) {}

const std::vector<SynonymId>& Dictionary::lookup(const std::string& name) const {
  static const std::vector<SynonymId> kNone;
  auto it = index_.find(name);
  return it == index_.end() ? kNone : it->second;
}

bool Dictionary::contains(const std::string& name, const ConceptId& cui) const {
  for (SynonymId id : lookup(name)) {
    if (entries_[id].cui == cui) return true;
  }
  return false;
}

std::optional<SynonymId> Dictionary::add(std::string name, ConceptId cui) {
  if (name.empty()) throw Error("dictionary entry with empty name");
  if (cui.empty()) throw Error("dictionary entry with empty concept id");
  if (contains(name, cui)) return std::nullopt;
  const auto id = static_cast<SynonymId>(entries_.size());
  index_[name].push_back(id);
  entries_.push_back({id, std::move(name), std::move(cui)});
  return id;
}

void SubstitutionMap::insert(std::string_view short_form, std::string_view long_form) {
  std::string key;
  std::string value;
  try {
    key = normalize_text(short_form);
    value = normalize_text(long_form);
  } catch (const EmptyMentionError&) {
    throw ConfigError("substitution entry normalizes to nothing: '" + std::string(short_form) +
                      "' -> '" + std::string(long_form) + "'");
  }
  if (key == value) throw ConfigError("substitution maps '" + key + "' to itself");
  max_key_tokens_ = std::max(max_key_tokens_, split_spaces(key).size());
  pairs_[std::move(key)] = std::move(value);
}

std::string SubstitutionMap::apply(std::string_view text) const {
  if (pairs_.empty()) return std::string(text);
  const auto tokens = split_spaces(text);
  std::vector<std::string> out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t len = std::min(max_key_tokens_, tokens.size() - i); len >= 1; --len) {
      auto it = pairs_.find(join(tokens, i, i + len));
      if (it != pairs_.end()) {
        out.push_back(it->second);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(tokens[i++]);
  }
  return join(out, 0, out.size());
}

bool MentionComponent::is_positive(const ConceptId& cui) const {
  return std::binary_search(gold.begin(), gold.end(), cui);
}

std::string normalize_text(std::string_view raw, const SubstitutionMap& abbrev,
                           const SubstitutionMap& spelling) {
  std::string text = clean(raw, {});
  text = abbrev.apply(text);
  text = spelling.apply(text);
  if (text.empty()) throw EmptyMentionError(std::string(raw));
  return text;
}

std::string normalize_text(std::string_view raw) {
  static const SubstitutionMap kEmpty;
  return normalize_text(raw, kEmpty, kEmpty);
}

std::vector<std::string> split_composite(std::string_view text, std::size_t head_words) {
  const std::vector<std::string> identity{std::string(text)};
  if (head_words == 0) return identity;
  const auto tokens = split_spaces(clean(text, U",/"));

  std::vector<std::vector<std::string>> conjuncts(1);
  bool in_separator = false;
  for (const auto& tok : tokens) {
    if (tok == "," || tok == "/" || tok == "and") {
      if (conjuncts.back().empty()) return identity;
      in_separator = true;
      continue;
    }
    if (in_separator) {
      conjuncts.emplace_back();
      in_separator = false;
    }
    conjuncts.back().push_back(tok);
  }
  if (in_separator || conjuncts.size() < 2) return identity;

  const auto& last = conjuncts.back();
  if (last.size() < head_words + 1) return identity;
  const std::vector<std::string> head(last.end() - static_cast<std::ptrdiff_t>(head_words),
                                      last.end());

  std::vector<std::string> out;
  out.reserve(conjuncts.size());
  for (std::size_t c = 0; c + 1 < conjuncts.size(); ++c) {
    const auto& conj = conjuncts[c];
    const bool has_head =
        conj.size() > head_words &&
        std::equal(head.begin(), head.end(), conj.end() - static_cast<std::ptrdiff_t>(head_words));
    std::string part = join(conj, 0, conj.size());
    if (!has_head) part += " " + join(head, 0, head.size());
    out.push_back(std::move(part));
  }
  out.push_back(join(last, 0, last.size()));
  return out;
}

std::vector<std::string> composite_parts(std::string_view raw, const PreprocessOptions& opts) {
  static const SubstitutionMap kEmpty;
  const SubstitutionMap& abbrev = opts.abbreviations ? *opts.abbreviations : kEmpty;
  const SubstitutionMap& spelling = opts.spelling ? *opts.spelling : kEmpty;
  std::vector<std::string> parts;
  if (!opts.split_composites) return parts;
  for (const auto& part : split_composite(clean(raw, U",/"), opts.head_words)) {
    try {
      parts.push_back(normalize_text(part, abbrev, spelling));
    } catch (const EmptyMentionError&) {
    }
  }
  return parts;
}

MentionRecord preprocess_mention(std::string_view raw, const std::vector<ConceptId>& gold,
                                 const PreprocessOptions& opts) {
  static const SubstitutionMap kEmpty;
  const SubstitutionMap& abbrev = opts.abbreviations ? *opts.abbreviations : kEmpty;
  const SubstitutionMap& spelling = opts.spelling ? *opts.spelling : kEmpty;

  const auto sorted_unique = [](std::vector<ConceptId> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  };

  MentionRecord rec;
  rec.raw = std::string(raw);

  auto parts = composite_parts(raw, opts);

  if (parts.size() > 1 && parts.size() == gold.size()) {
    rec.is_composite = true;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      rec.components.push_back({std::move(parts[i]), {gold[i]}});
    }
    return rec;
  }
  rec.unsplit_fallback = parts.size() > 1;
  rec.components.push_back({normalize_text(raw, abbrev, spelling), sorted_unique(gold)});
  return rec;
}

Dictionary read_dictionary(std::istream& in, const std::string& source) {
  Dictionary dict;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_line(std::move(line));
    if (trim(line).empty()) continue;
    const auto sep = line.find("||");
    if (sep == std::string::npos) throw ParseError(source, lineno, "expected 'CUI||name'");
    ConceptId cui(std::string_view(line).substr(0, sep));
    if (cui.empty()) throw ParseError(source, lineno, "empty concept id");
    std::string name;
    try {
      name = normalize_text(std::string_view(line).substr(sep + 2));
    } catch (const EmptyMentionError&) {
      continue;
    }
    dict.add(std::move(name), std::move(cui));
  }
  if (dict.empty()) throw EmptyDictionaryError(source);
  return dict;
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dictionary: " + path.string());
  return read_dictionary(in, path.string());
}

void write_dictionary(std::ostream& out, const Dictionary& dict) {
  for (const auto& e : dict.entries()) out << e.cui.str() << "||" << e.name << '\n';
}

void save_dictionary(const std::filesystem::path& path, const Dictionary& dict) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dictionary: " + path.string());
  write_dictionary(out, dict);
}

MentionSet read_mentions(std::istream& in, const std::string& source,
                         const PreprocessOptions& opts) {
  MentionSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_line(std::move(line));
    if (trim(line).empty()) continue;
    const auto sep = line.rfind("||");
    if (sep == std::string::npos) throw ParseError(source, lineno, "expected 'mention||CUI'");
    std::vector<ConceptId> gold;
    std::string_view rest = std::string_view(line).substr(sep + 2);
    while (true) {
      const auto bar = rest.find('|');
      ConceptId id(rest.substr(0, bar));
      if (id.empty()) throw ParseError(source, lineno, "empty concept id");
      gold.push_back(std::move(id));
      if (bar == std::string_view::npos) break;
      rest.remove_prefix(bar + 1);
    }
    try {
      set.mentions.push_back(preprocess_mention(std::string_view(line).substr(0, sep), gold, opts));
    } catch (const EmptyMentionError&) {
      ++set.skipped_empty;
    }
  }
  return set;
}

MentionSet load_mentions(const std::filesystem::path& path, const PreprocessOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mention file: " + path.string());
  return read_mentions(in, path.string(), opts);
}

SubstitutionMap read_substitution_map(std::istream& in, const std::string& source) {
  SubstitutionMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_line(std::move(line));
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "expected 'short<TAB>long'");
    try {
      map.insert(std::string_view(line).substr(0, tab), std::string_view(line).substr(tab + 1));
    } catch (const ConfigError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return map;
}

SubstitutionMap load_substitution_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open substitution map: " + path.string());
  return read_substitution_map(in, path.string());
}

Dictionary merge_train_to_dictionary(const Dictionary& dict,
                                     const std::vector<MentionRecord>& train) {
  Dictionary merged = dict;
  for (const auto& rec : train) {
    for (const auto& comp : rec.components) {
      if (comp.gold.size() != 1) continue;
      merged.add(comp.text, comp.gold.front());
    }
  }
  return merged;
}

}  // namespace synorm

#include "synorm/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "synorm/error.hpp"

namespace synorm {

namespace {

constexpr std::string_view kConsonants = "bcdfghklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kEndingClasses = 12;
constexpr std::size_t kEndingMembers = 4;
constexpr std::size_t kDictEndings = 3;  // members the dictionary may use
constexpr std::size_t kHeadClasses = 10;
constexpr std::size_t kHeadMembers = 3;
constexpr std::size_t kDictHeads = 2;
constexpr std::size_t kOrders = 3;
constexpr std::size_t kFamilySize = 10;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
  bool coin(double p) { return static_cast<double>(gen_() >> 11) * 0x1.0p-53 < p; }
  char pick(std::string_view s) { return s[below(s.size())]; }

 private:
  std::mt19937_64 gen_;
};

std::string syllable(Rng& rng) {
  std::string s;
  s.push_back(rng.pick(kConsonants));
  s.push_back(rng.pick(kVowels));
  if (rng.coin(0.3)) s.push_back(rng.pick(kConsonants));
  return s;
}

std::string word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) w += syllable(rng);
  return w;
}

// Vowel-initial ending such as "itis" or "oma".
std::string ending(Rng& rng) {
  std::string e;
  e.push_back(rng.pick(kVowels));
  e.push_back(rng.pick(kConsonants));
  e.push_back(rng.pick(kVowels));
  if (rng.coin(0.5)) e.push_back(rng.pick(kConsonants));
  if (rng.coin(0.3)) e.push_back(rng.pick(kVowels));
  return e;
}

// Draws `count` strings from `make` that are new to `used`.
template <typename Make>
std::vector<std::string> distinct(Rng& rng, std::size_t count, std::set<std::string>& used,
                                  Make make) {
  std::vector<std::string> out;
  while (out.size() < count) {
    auto s = make(rng);
    if (used.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

struct Concept {
  std::string cui;
  std::size_t modifier;
  std::size_t stem;
  std::size_t ending_class;
  std::size_t head_class;
};

struct Surface {
  std::size_t ending = 0;
  std::size_t head = 0;
  std::size_t order = 0;
  bool abbreviated = false;
};

struct Lexicon {
  std::vector<std::string> modifiers;
  std::vector<std::string> stems;
  std::vector<std::vector<std::string>> endings;
  std::vector<std::vector<std::string>> heads;

  std::string render(const Concept& c, const Surface& s) const {
    const std::string& mod = modifiers[c.modifier];
    const std::string& stem = stems[c.stem];
    const std::string& end = endings[c.ending_class][s.ending];
    const std::string& head = heads[c.head_class][s.head];
    std::vector<std::string> tokens;
    if (s.abbreviated) {
      tokens = {std::string{mod[0], stem[0], end[0]}, head};
    } else {
      tokens = {mod, stem + end, head};
    }
    std::rotate(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(s.order % tokens.size()),
                tokens.end());
    std::string out;
    for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
    return out;
  }
};

std::string apply_typo(std::string text, Rng& rng) {
  std::vector<std::size_t> starts;
  std::vector<std::size_t> lengths;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = text.find(' ', i);
    if (j == std::string::npos) j = text.size();
    if (j - i >= 4) {
      starts.push_back(i);
      lengths.push_back(j - i);
    }
    i = j + 1;
  }
  if (starts.empty()) return text;
  const std::size_t w = rng.below(starts.size());
  // Keep the first character of the word intact.
  const std::size_t pos = starts[w] + 1 + rng.below(lengths[w] - 1);
  const char letter = rng.coin(0.5) ? rng.pick(kVowels) : rng.pick(kConsonants);
  switch (rng.below(4)) {
    case 0:
      text[pos] = letter;
      break;
    case 1:
      text.erase(pos, 1);
      break;
    case 2:
      if (pos + 1 < starts[w] + lengths[w]) std::swap(text[pos], text[pos + 1]);
      else std::swap(text[pos], text[pos - 1]);
      break;
    default:
      text.insert(text.begin() + static_cast<std::ptrdiff_t>(pos), letter);
      break;
  }
  return text;
}

}  // namespace

Variation Variation::parse(std::string_view spec) {
  Variation v;
  if (spec == "identity") return v;
  std::size_t i = 0;
  while (i <= spec.size()) {
    std::size_t j = spec.find(',', i);
    if (j == std::string_view::npos) j = spec.size();
    const auto item = spec.substr(i, j - i);
    if (item == "typo") v.typo = true;
    else if (item == "suffix") v.suffix = true;
    else if (item == "reorder") v.reorder = true;
    else if (item == "abbrev") v.abbrev = true;
    else throw ConfigError("unknown variation '" + std::string(item) +
                           "' (expected identity or typo,suffix,reorder,abbrev)");
    i = j + 1;
  }
  return v;
}

std::string Variation::to_string() const {
  if (identity()) return "identity";
  std::string out;
  const auto add = [&](bool on, const char* name) {
    if (on) out += (out.empty() ? "" : ",") + std::string(name);
  };
  add(typo, "typo");
  add(suffix, "suffix");
  add(reorder, "reorder");
  add(abbrev, "abbrev");
  return out;
}

void SynthSpec::validate() const {
  if (n_cuis < 2) throw ConfigError("gensynth needs at least 2 concepts");
  if (syns_per_cui < 1) throw ConfigError("gensynth needs at least 1 synonym per concept");
  if (syns_per_cui > kDictEndings * kDictHeads * kOrders) {
    throw ConfigError("gensynth supports at most " +
                      std::to_string(kDictEndings * kDictHeads * kOrders) + " synonyms per concept");
  }
}

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  Lexicon lex;
  std::set<std::string> used;
  lex.modifiers = distinct(rng, std::max<std::size_t>(4, spec.n_cuis / 50), used,
                           [](Rng& r) { return word(r, 2); });
  lex.stems = distinct(rng, std::max<std::size_t>(5, spec.n_cuis / 20), used,
                       [](Rng& r) { return word(r, 2); });
  for (std::size_t c = 0; c < kEndingClasses; ++c) {
    lex.endings.push_back(distinct(rng, kEndingMembers, used, ending));
  }
  for (std::size_t c = 0; c < kHeadClasses; ++c) {
    lex.heads.push_back(distinct(rng, kHeadMembers, used, [](Rng& r) { return word(r, 2 + r.below(2)); }));
  }

  // Concepts come in families sharing modifier, stem and ending class; family
  // members differ only in the head class.
  std::vector<Concept> concepts;
  std::set<std::array<std::size_t, 3>> families;
  while (concepts.size() < spec.n_cuis) {
    Concept base;
    base.modifier = rng.below(lex.modifiers.size());
    base.stem = rng.below(lex.stems.size());
    base.ending_class = rng.below(kEndingClasses);
    if (!families.insert({base.modifier, base.stem, base.ending_class}).second) continue;
    std::vector<std::size_t> heads(kHeadClasses);
    for (std::size_t i = 0; i < heads.size(); ++i) heads[i] = i;
    for (std::size_t i = heads.size(); i > 1; --i) std::swap(heads[i - 1], heads[rng.below(i)]);
    for (std::size_t i = 0; i < kFamilySize && concepts.size() < spec.n_cuis; ++i) {
      Concept c = base;
      c.head_class = heads[i];
      char buf[32];
      std::snprintf(buf, sizeof(buf), "SYN:%06zu", concepts.size() + 1);
      c.cui = buf;
      concepts.push_back(std::move(c));
    }
  }

  SynthData data;
  std::unordered_set<std::string> names;  // every dictionary name, any concept
  std::vector<std::vector<std::string>> synonyms(concepts.size());
  for (std::size_t ci = 0; ci < concepts.size(); ++ci) {
    const auto& c = concepts[ci];
    for (std::size_t attempt = 0; synonyms[ci].size() < spec.syns_per_cui && attempt < 200; ++attempt) {
      Surface s;
      if (attempt > 0) {
        s.ending = rng.below(kDictEndings);
        s.head = rng.below(kDictHeads);
        s.order = rng.below(kOrders);
        s.abbreviated = spec.variation.abbrev && rng.coin(0.15);
      }
      auto name = lex.render(c, s);
      if (!names.insert(name).second) continue;
      synonyms[ci].push_back(name);
      data.dictionary.push_back({std::move(name), c.cui});
    }
  }

  std::unordered_set<std::string> train_texts;
  const auto sample_mention = [&](bool is_test) -> SynthLine {
    for (std::size_t attempt = 0;; ++attempt) {
      const std::size_t ci = rng.below(concepts.size());
      const auto& c = concepts[ci];
      std::string text;
      if (spec.variation.identity()) {
        text = synonyms[ci][rng.below(synonyms[ci].size())];
        return {std::move(text), c.cui};
      }
      Surface s;
      s.ending = spec.variation.suffix ? rng.below(kEndingMembers) : 0;
      s.head = spec.variation.suffix ? rng.below(kHeadMembers) : 0;
      s.order = spec.variation.reorder ? rng.below(kOrders) : 0;
      s.abbreviated = spec.variation.abbrev && rng.coin(0.1);
      text = lex.render(c, s);
      if (spec.variation.typo && rng.coin(0.5)) text = apply_typo(std::move(text), rng);
      const bool fresh = !names.contains(text) && !(is_test && train_texts.contains(text));
      if (fresh || attempt >= 1000) {
        if (!is_test) train_texts.insert(text);
        return {std::move(text), c.cui};
      }
    }
  };
  for (std::size_t i = 0; i < spec.n_train; ++i) data.train.push_back(sample_mention(false));
  for (std::size_t i = 0; i < spec.n_test; ++i) data.test.push_back(sample_mention(true));
  return data;
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* file, const std::vector<SynthLine>& lines, bool cui_first) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / file).string());
    for (const auto& l : lines) {
      if (cui_first) out << l.cui << "||" << l.text << '\n';
      else out << l.text << "||" << l.cui << '\n';
    }
  };
  write("dictionary.txt", data.dictionary, true);
  write("train.txt", data.train, false);
  write("test.txt", data.test, false);
}

}  // namespace synorm

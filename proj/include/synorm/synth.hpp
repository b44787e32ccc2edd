#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace synorm {

// Which surface variations the generator may apply.
struct Variation {
  bool typo = false;     // character edits in mentions
  bool suffix = false;   // swap a word ending / head noun for an equivalent one
  bool reorder = false;  // rotate token order
  bool abbrev = false;   // initialisms

  bool identity() const { return !typo && !suffix && !reorder && !abbrev; }

  // "identity" or a comma-separated subset of typo,suffix,reorder,abbrev.
  static Variation parse(std::string_view spec);
  std::string to_string() const;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t n_cuis = 200;
  std::size_t syns_per_cui = 5;
  std::size_t n_train = 500;
  std::size_t n_test = 200;
  Variation variation;

  void validate() const;
};

struct SynthLine {
  std::string text;
  std::string cui;
};

struct SynthData {
  std::vector<SynthLine> dictionary;  // `CUI||name`
  std::vector<SynthLine> train;       // `mention||CUI`
  std::vector<SynthLine> test;
};

// Concepts come in families that share a modifier, stem and ending class and
// differ only in head class, so near neighbours are easy to confuse. Each
// ending and head class holds several interchangeable surface forms.
// Mentions are held-out combinations: never a dictionary name of their
// concept (except under identity, where they are exact names), and test
// mentions never repeat a training mention. Deterministic in the seed.
SynthData generate_synthetic(const SynthSpec& spec);

// Writes dictionary.txt, train.txt and test.txt into `dir`.
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

}  // namespace synorm

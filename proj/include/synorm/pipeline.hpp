#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synorm/corpus.hpp"
#include "synorm/dense_encoder.hpp"
#include "synorm/retrieval.hpp"
#include "synorm/scorer.hpp"
#include "synorm/sparse_encoder.hpp"
#include "synorm/training.hpp"

namespace synorm {

// Everything a training run needs. Serialized as flat `key = value` lines.
struct RunConfig {
  std::filesystem::path dictionary;
  std::filesystem::path train;
  std::filesystem::path test;  // optional; used for per-epoch candidate recall
  std::filesystem::path abbrev;
  std::filesystem::path spelling;
  std::filesystem::path out;

  TrainConfig training;
  EncoderConfig encoder;
  double lambda_init = 1.0;
  std::size_t head_words = 1;
  bool sparse_normalize = true;
  bool merge_train = true;
  // Keep a training mention's own merged copy out of its candidates.
  bool exclude_self = true;

  // Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
};

// Parses `key = value` lines; '#' starts a comment line. Relative paths are
// resolved against `base_dir` when given.
RunConfig parse_run_config(std::istream& in, const std::string& source,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Checks that input files exist and training settings are valid.
void validate_run_config(const RunConfig& cfg);

struct PreparedData {
  SubstitutionMap abbrev;
  SubstitutionMap spelling;
  Dictionary dictionary;  // merged with training mentions when configured
  std::size_t merged_from = 0;  // first merged synonym id
  TfIdfModel tfidf;
  std::vector<MentionRecord> train;
  std::vector<MentionRecord> test;
};

PreprocessOptions preprocess_options(const PreparedData& data, std::size_t head_words);
PreparedData prepare_data(const RunConfig& cfg);

std::string checkpoint_name(std::size_t epoch);

// Trains and writes the run directory:
//   run.conf, dictionary.txt, tfidf.txt, abbrev.tsv, spelling.tsv,
//   checkpoint-NNN.bin (000 = initial), metrics.jsonl, summary.json
TrainState run_training(const RunConfig& cfg, std::ostream* log = nullptr);

// A trained model reloaded from a checkpoint inside a run directory.
struct LoadedRun {
  std::filesystem::path dir;
  RunConfig config;
  SubstitutionMap abbrev;
  SubstitutionMap spelling;
  Dictionary dictionary;
  TfIdfModel tfidf;
  HashedNgramEncoder encoder;
  HybridWeight weight;
  std::unique_ptr<SynonymIndex> index;

  PreprocessOptions preprocess() const;
};

std::unique_ptr<LoadedRun> load_run(const std::filesystem::path& checkpoint);

// Checkpoints present in a run directory, ordered by epoch.
std::vector<std::pair<std::size_t, std::filesystem::path>> list_checkpoints(
    const std::filesystem::path& dir);

}  // namespace synorm

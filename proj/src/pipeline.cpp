#include "synorm/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "synorm/error.hpp"

namespace synorm {

namespace {

std::string trim_copy(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("bad value for '" + key + "': '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_map(const std::filesystem::path& path, const SubstitutionMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [k, v] : map.pairs()) out << k << '\t' << v << '\n';
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dictionary") dictionary = value;
  else if (key == "train") train = value;
  else if (key == "test") test = value;
  else if (key == "abbrev") abbrev = value;
  else if (key == "spelling") spelling = value;
  else if (key == "out") out = value;
  else if (key == "k") training.k = parse_number<std::size_t>(key, value);
  else if (key == "alpha") training.alpha = parse_number<double>(key, value);
  else if (key == "epochs") training.epochs = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") training.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "learning_rate") training.learning_rate = parse_number<double>(key, value);
  else if (key == "weight_decay") training.weight_decay = parse_number<double>(key, value);
  else if (key == "loss") training.loss = parse_loss_kind(value);
  else if (key == "seed") {
    training.seed = parse_number<std::uint64_t>(key, value);
    encoder.seed = training.seed;
  }
  else if (key == "exclude_self") exclude_self = parse_bool(key, value);
  else if (key == "threads") training.threads = parse_number<std::size_t>(key, value);
  else if (key == "dim") encoder.dim = parse_number<std::size_t>(key, value);
  else if (key == "buckets") encoder.buckets = parse_number<std::size_t>(key, value);
  else if (key == "ngram_order") encoder.ngram_order = parse_number<std::size_t>(key, value);
  else if (key == "max_chars") encoder.max_chars = parse_number<std::size_t>(key, value);
  else if (key == "init_scale") encoder.init_scale = parse_number<double>(key, value);
  else if (key == "lambda_init") lambda_init = parse_number<double>(key, value);
  else if (key == "head_words") head_words = parse_number<std::size_t>(key, value);
  else if (key == "sparse_normalize") sparse_normalize = parse_bool(key, value);
  else if (key == "merge_train") merge_train = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  const auto path = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) out << key << " = " << p.string() << '\n';
  };
  path("dictionary", dictionary);
  path("train", train);
  path("test", test);
  path("abbrev", abbrev);
  path("spelling", spelling);
  path("out", this->out);
  out << "k = " << training.k << '\n'
      << "alpha = " << format_double(training.alpha) << '\n'
      << "epochs = " << training.epochs << '\n'
      << "batch_size = " << training.batch_size << '\n'
      << "learning_rate = " << format_double(training.learning_rate) << '\n'
      << "weight_decay = " << format_double(training.weight_decay) << '\n'
      << "loss = " << to_string(training.loss) << '\n'
      << "seed = " << training.seed << '\n'
      << "threads = " << training.threads << '\n'
      << "dim = " << encoder.dim << '\n'
      << "buckets = " << encoder.buckets << '\n'
      << "ngram_order = " << encoder.ngram_order << '\n'
      << "max_chars = " << encoder.max_chars << '\n'
      << "init_scale = " << format_double(encoder.init_scale) << '\n'
      << "lambda_init = " << format_double(lambda_init) << '\n'
      << "head_words = " << head_words << '\n'
      << "sparse_normalize = " << (sparse_normalize ? "true" : "false") << '\n'
      << "merge_train = " << (merge_train ? "true" : "false") << '\n'
      << "exclude_self = " << (exclude_self ? "true" : "false") << '\n';
  return out.str();
}

RunConfig parse_run_config(std::istream& in, const std::string& source,
                           const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim_copy(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    const std::string key = trim_copy(std::string_view(t).substr(0, eq));
    const std::string value = trim_copy(std::string_view(t).substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  if (!base_dir.empty()) {
    for (auto* p : {&cfg.dictionary, &cfg.train, &cfg.test, &cfg.abbrev, &cfg.spelling, &cfg.out}) {
      if (!p->empty() && p->is_relative()) *p = base_dir / *p;
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  return parse_run_config(in, path.string(), path.parent_path());
}

void validate_run_config(const RunConfig& cfg) {
  const auto require = [](const std::filesystem::path& p, const char* what, bool optional) {
    if (p.empty()) {
      if (optional) return;
      throw ConfigError(std::string("missing ") + what + " path");
    }
    if (!std::filesystem::is_regular_file(p)) {
      throw ConfigError(std::string(what) + " not found: " + p.string());
    }
  };
  require(cfg.dictionary, "dictionary", false);
  require(cfg.train, "train", false);
  require(cfg.test, "test", true);
  require(cfg.abbrev, "abbrev", true);
  require(cfg.spelling, "spelling", true);
  if (cfg.out.empty()) throw ConfigError("missing out directory");
  if (cfg.head_words < 1) throw ConfigError("head_words must be >= 1");
  if (!std::isfinite(cfg.lambda_init)) throw ConfigError("lambda_init must be finite");
  cfg.training.validate();
  cfg.encoder.validate();
}

PreprocessOptions preprocess_options(const PreparedData& data, std::size_t head_words) {
  PreprocessOptions opts;
  opts.abbreviations = &data.abbrev;
  opts.spelling = &data.spelling;
  opts.head_words = head_words;
  return opts;
}

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData data;
  if (!cfg.abbrev.empty()) data.abbrev = load_substitution_map(cfg.abbrev);
  if (!cfg.spelling.empty()) data.spelling = load_substitution_map(cfg.spelling);
  const auto opts = preprocess_options(data, cfg.head_words);
  data.train = load_mentions(cfg.train, opts).mentions;
  if (!cfg.test.empty()) data.test = load_mentions(cfg.test, opts).mentions;
  data.dictionary = load_dictionary(cfg.dictionary);
  data.merged_from = data.dictionary.size();
  if (cfg.merge_train) data.dictionary = merge_train_to_dictionary(data.dictionary, data.train);
  TfIdfOptions tf;
  tf.l2_normalize = cfg.sparse_normalize;
  data.tfidf = fit_tfidf(data.dictionary, tf);
  return data;
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-%03zu.bin", epoch);
  return buf;
}

TrainState run_training(const RunConfig& cfg, std::ostream* log) {
  validate_run_config(cfg);
  PreparedData data = prepare_data(cfg);

  std::filesystem::create_directories(cfg.out);
  {
    std::ofstream conf(cfg.out / "run.conf", std::ios::binary);
    conf << cfg.to_text();
  }
  save_dictionary(cfg.out / "dictionary.txt", data.dictionary);
  data.tfidf.save(cfg.out / "tfidf.txt");
  write_map(cfg.out / "abbrev.tsv", data.abbrev);
  write_map(cfg.out / "spelling.tsv", data.spelling);

  HashedNgramEncoder encoder(cfg.encoder);
  HybridWeight weight{cfg.lambda_init};

  std::ofstream metrics(cfg.out / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw Error("cannot write metrics log in " + cfg.out.string());

  TrainHooks hooks;
  if (!data.test.empty()) hooks.dev = &data.test;
  hooks.on_checkpoint = [&](std::size_t epoch, const DenseEncoder&, const HybridWeight& w) {
    encoder.save(cfg.out / checkpoint_name(epoch), w.lambda);
  };
  const std::string recall_key = "recall@" + std::to_string(cfg.training.k);
  hooks.on_epoch = [&](const EpochMetrics& m) {
    nlohmann::json j = {{"epoch", m.epoch},
                        {"loss", m.loss},
                        {"skipped_fraction", m.skipped_fraction},
                        {recall_key, m.train_recall},
                        {"lambda", m.lambda},
                        {"steps", m.steps},
                        {"empty_batches", m.empty_batches}};
    if (m.dev_recall) j["dev_" + recall_key] = *m.dev_recall;
    metrics << j.dump() << '\n';
    metrics.flush();
    if (log) {
      *log << "epoch " << m.epoch << " loss " << m.loss << " " << recall_key << " "
           << m.train_recall;
      if (m.dev_recall) *log << " dev " << *m.dev_recall;
      *log << " lambda " << m.lambda << '\n';
    }
  };

  TrainConfig training = cfg.training;
  if (cfg.exclude_self) training.merged_from = data.merged_from;
  TrainState state = train(data.dictionary, data.tfidf, data.train, training, encoder, weight, hooks);

  nlohmann::json summary = {{"epochs", state.epochs_completed},
                            {"optimizer_steps", state.optimizer_steps},
                            {"final_" + recall_key, state.final_train_recall},
                            {"lambda", weight.lambda},
                            {"dictionary_size", data.dictionary.size()},
                            {"train_mentions", data.train.size()}};
  if (state.final_dev_recall) summary["final_dev_" + recall_key] = *state.final_dev_recall;
  std::ofstream(cfg.out / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
  return state;
}

PreprocessOptions LoadedRun::preprocess() const {
  PreprocessOptions opts;
  opts.abbreviations = &abbrev;
  opts.spelling = &spelling;
  opts.head_words = config.head_words;
  return opts;
}

std::unique_ptr<LoadedRun> load_run(const std::filesystem::path& checkpoint) {
  if (!std::filesystem::is_regular_file(checkpoint)) {
    throw Error("checkpoint not found: " + checkpoint.string());
  }
  const auto dir = checkpoint.parent_path().empty() ? std::filesystem::path(".")
                                                    : checkpoint.parent_path();
  auto loaded = HashedNgramEncoder::load(checkpoint);
  auto run = std::unique_ptr<LoadedRun>(new LoadedRun{
      dir, {}, {}, {}, {}, {}, std::move(loaded.encoder), HybridWeight{loaded.lambda}, nullptr});
  {
    std::ifstream in(dir / "run.conf", std::ios::binary);
    if (!in) throw Error("run directory has no run.conf: " + dir.string());
    run->config = parse_run_config(in, (dir / "run.conf").string());
  }
  run->abbrev = load_substitution_map(dir / "abbrev.tsv");
  run->spelling = load_substitution_map(dir / "spelling.tsv");
  run->dictionary = load_dictionary(dir / "dictionary.txt");
  run->tfidf = TfIdfModel::load(dir / "tfidf.txt");
  run->index = std::make_unique<SynonymIndex>(run->dictionary, run->tfidf);
  run->index->refresh_dense(run->encoder, run->config.training.threads);
  return run;
}

std::vector<std::pair<std::size_t, std::filesystem::path>> list_checkpoints(
    const std::filesystem::path& dir) {
  static const std::regex kPattern(R"(checkpoint-(\d+)\.bin)");
  std::vector<std::pair<std::size_t, std::filesystem::path>> out;
  if (!std::filesystem::is_directory(dir)) throw Error("not a run directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kPattern)) out.emplace_back(std::stoul(m[1].str()), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace synorm

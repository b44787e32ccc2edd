#include "synorm/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "synorm/error.hpp"
#include "synorm/eval.hpp"
#include "synorm/pipeline.hpp"
#include "synorm/synth.hpp"

namespace synorm::cli {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

int cmd_train(const TrainArgs& args, std::ostream& err) {
  RunConfig cfg;
  if (!args.config.empty()) cfg = load_run_config(args.config);
  for (const auto& [key, value] : args.flags) cfg.set(key, value);
  for (const auto& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  run_training(cfg, &err);
  return kSuccess;
}

std::vector<std::size_t> parse_ks(const std::string& spec) {
  std::vector<std::size_t> ks;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t k = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), k);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || k == 0) {
      throw ConfigError("bad k list '" + spec + "'");
    }
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("empty k list");
  return ks;
}

int cmd_eval(const std::string& checkpoint, const std::string& test, const std::string& ks_spec,
             const std::string& failures, std::size_t failures_k, std::ostream& out) {
  const auto ks = parse_ks(ks_spec);
  auto run = load_run(checkpoint);
  const auto mentions = load_mentions(test, run->preprocess());
  const auto report = evaluate(*run->index, run->tfidf, run->encoder, run->weight,
                               mentions.mentions, ks, run->config.training.threads);
  out << report.to_json().dump(2) << '\n';
  if (!failures.empty()) {
    std::ofstream f(failures, std::ios::binary);
    if (!f) throw Error("cannot write " + failures);
    report.write_failures(f, run->dictionary, failures_k);
  }
  return kSuccess;
}

int cmd_predict(const std::string& checkpoint, const std::string& mention, std::size_t k,
                std::ostream& out) {
  if (k == 0) throw ConfigError("--k must be >= 1");
  auto run = load_run(checkpoint);
  const PreprocessOptions opts = run->preprocess();
  auto parts = composite_parts(mention, opts);
  if (parts.size() < 2) parts = {normalize_text(mention, *opts.abbreviations, *opts.spelling)};
  for (std::size_t c = 0; c < parts.size(); ++c) {
    MentionComponent comp{parts[c], {}};
    const auto pred = predict_component(comp, run->tfidf, run->encoder, *run->index, run->weight, k);
    for (std::size_t r = 0; r < pred.ranked.size(); ++r) {
      const auto& hit = pred.ranked[r];
      out << (c + 1) << '\t' << (r + 1) << '\t' << hit.cui.str() << '\t'
          << run->dictionary.name(hit.synonym) << '\t' << format_double(hit.score) << '\n';
    }
  }
  return kSuccess;
}

int cmd_candidates(const std::string& run_dir, const std::string& mentions_path,
                   std::optional<std::size_t> k_flag, std::optional<double> alpha_flag,
                   std::ostream& out) {
  const auto checkpoints = list_checkpoints(run_dir);
  if (checkpoints.empty()) throw Error("no checkpoints in " + run_dir);
  out << "epoch\tmention\trank\tsynonym\tcui\tis_positive\tsparse_score\tdense_score\n";
  for (const auto& [epoch, path] : checkpoints) {
    auto run = load_run(path);
    const std::size_t k = k_flag.value_or(run->config.training.k);
    const double alpha = alpha_flag.value_or(run->config.training.alpha);
    const auto mentions = load_mentions(mentions_path, run->preprocess());
    for (const auto& rec : mentions.mentions) {
      for (const auto& comp : rec.components) {
        const auto repr = represent(comp.text, run->tfidf, run->encoder);
        const auto set = compose_candidates(repr, *run->index, k, alpha);
        for (std::size_t r = 0; r < set.size(); ++r) {
          const auto& cand = set.candidates[r];
          const auto& cui = run->dictionary.cui(cand.id);
          out << epoch << '\t' << comp.text << '\t' << (r + 1) << '\t'
              << run->dictionary.name(cand.id) << '\t' << cui.str() << '\t'
              << (comp.is_positive(cui) ? 1 : 0) << '\t' << format_double(cand.sparse_score)
              << '\t' << format_double(cand.dense_score) << '\n';
        }
      }
    }
  }
  return kSuccess;
}

int cmd_gensynth(const SynthSpec& spec, const std::string& out_dir) {
  write_synthetic(generate_synthetic(spec), out_dir);
  return kSuccess;
}

int cmd_fit_sparse(const std::string& dictionary, const std::string& train,
                   const std::string& out_path, bool no_normalize) {
  Dictionary dict = load_dictionary(dictionary);
  if (!train.empty()) {
    dict = merge_train_to_dictionary(dict, load_mentions(train, PreprocessOptions{}).mentions);
  }
  TfIdfOptions opts;
  opts.l2_normalize = !no_normalize;
  fit_tfidf(dict, opts).save(std::filesystem::path(out_path));
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dictionary-backed entity normalization with sparse + dense synonym retrieval"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model and write a run directory");
  train->add_option("--config", train_args.config, "key = value config file");
  train->add_option("--set", train_args.sets, "Override any config key (key=value)");
  for (const char* key : {"dictionary", "train", "test", "abbrev", "spelling", "out", "seed", "k",
                          "alpha", "loss", "epochs", "batch_size", "learning_rate",
                          "weight_decay", "dim", "buckets", "threads"}) {
    std::string flag = std::string("--") + key;
    for (char& c : flag) {
      if (c == '_') c = '-';
    }
    train->add_option_function<std::string>(
        flag, [&train_args, key](const std::string& v) { train_args.flags[key] = v; },
        std::string("Override '") + key + "'");
  }

  std::string checkpoint;
  std::string test;
  std::string ks = "1,5";
  std::string failures;
  std::size_t failures_k = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; JSON report on stdout");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file inside a run directory")->required();
  eval->add_option("--test", test, "Query file (mention||CUI lines)")->required();
  eval->add_option("--k", ks, "Comma-separated k values for Acc@k");
  eval->add_option("--failures", failures, "Write per-mention failures TSV here");
  eval->add_option("--failures-k", failures_k, "k used for the failures TSV");

  std::string mention;
  std::size_t predict_k = 5;
  auto* predict = app.add_subcommand("predict", "Rank concepts for one mention; TSV on stdout");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file inside a run directory")->required();
  predict->add_option("--mention", mention, "Mention text")->required();
  predict->add_option("--k", predict_k, "Number of concepts to print");

  std::string run_dir;
  std::string mentions_path;
  std::optional<std::size_t> cand_k;
  std::optional<double> cand_alpha;
  auto* candidates = app.add_subcommand("candidates", "Dump training candidates per checkpoint");
  candidates->add_option("--run", run_dir, "Run directory")->required();
  candidates->add_option("--mentions", mentions_path, "Query file")->required();
  candidates->add_option("--k", cand_k, "Candidates per mention (default: run's k)");
  candidates->add_option("--alpha", cand_alpha, "Dense ratio (default: run's alpha)");

  SynthSpec synth;
  std::string variation = "typo,suffix,reorder";
  std::string synth_out;
  auto* gensynth = app.add_subcommand("gensynth", "Generate a synthetic benchmark");
  gensynth->add_option("--seed", synth.seed, "Random seed");
  gensynth->add_option("--n-cuis", synth.n_cuis, "Number of concepts");
  gensynth->add_option("--syns-per-cui", synth.syns_per_cui, "Dictionary synonyms per concept");
  gensynth->add_option("--n-train", synth.n_train, "Training mentions");
  gensynth->add_option("--n-test", synth.n_test, "Test mentions");
  gensynth->add_option("--variation", variation, "identity or typo,suffix,reorder,abbrev");
  gensynth->add_option("--out", synth_out, "Output directory")->required();

  std::string fit_dict;
  std::string fit_train;
  std::string fit_out;
  bool no_normalize = false;
  auto* fit = app.add_subcommand("fit-sparse", "Fit and save the tf-idf model");
  fit->add_option("--dictionary", fit_dict, "Dictionary file")->required();
  fit->add_option("--train", fit_train, "Training mentions to merge first");
  fit->add_option("--out", fit_out, "Model output path")->required();
  fit->add_flag("--no-normalize", no_normalize, "Keep raw tf-idf weights");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*train) return cmd_train(train_args, err);
    if (*eval) return cmd_eval(checkpoint, test, ks, failures, failures_k, out);
    if (*predict) return cmd_predict(checkpoint, mention, predict_k, out);
    if (*candidates) return cmd_candidates(run_dir, mentions_path, cand_k, cand_alpha, out);
    if (*gensynth) {
      synth.variation = Variation::parse(variation);
      return cmd_gensynth(synth, synth_out);
    }
    if (*fit) return cmd_fit_sparse(fit_dict, fit_train, fit_out, no_normalize);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace synorm::cli

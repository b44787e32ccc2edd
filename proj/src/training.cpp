#include "synorm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "synorm/error.hpp"
#include "synorm/parallel.hpp"

namespace synorm {

namespace {

double log_sum_exp(std::span<const double> scores, const std::vector<bool>* mask) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask || (*mask)[i]) m = std::max(m, scores[i]);
  }
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask || (*mask)[i]) s += std::exp(scores[i] - m);
  }
  return m + std::log(s);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Deterministic Fisher-Yates; std::shuffle's draw sequence is unspecified.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMml: return "mml";
    case LossKind::kHardEm: return "hard_em";
    case LossKind::kPairwise: return "pairwise";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mml") return LossKind::kMml;
  if (name == "hard_em") return LossKind::kHardEm;
  if (name == "pairwise") return LossKind::kPairwise;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected mml, hard_em, pairwise)");
}

void TrainConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::vector<TrainingExample> make_examples(const std::vector<MentionRecord>& mentions,
                                           const TfIdfModel& tfidf, const Dictionary* dict,
                                           std::size_t merged_from) {
  std::vector<TrainingExample> out;
  for (const auto& rec : mentions) {
    for (const auto& comp : rec.components) {
      if (comp.gold.empty()) continue;
      TrainingExample ex{comp.text, tfidf.encode(comp.text), comp.gold, {}};
      if (dict) {
        for (SynonymId id : dict->lookup(comp.text)) {
          if (id >= merged_from) ex.exclude.push_back(id);
        }
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::vector<double> candidate_probabilities(const MentionRepr& mention, const CandidateSet& set,
                                            const SynonymIndex& index, const HybridWeight& w) {
  if (set.candidates.empty()) throw Error("candidate_probabilities: empty candidate set");
  std::vector<double> scores;
  scores.reserve(set.size());
  for (const auto& c : set.candidates) {
    scores.push_back(score(mention.sparse, mention.dense, index.sparse().row(c.id),
                           index.dense().row(c.id), w));
  }
  return softmax(scores);
}

std::vector<bool> positive_mask(const CandidateSet& set, std::span<const ConceptId> gold,
                                const Dictionary& dict) {
  std::vector<bool> mask(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    mask[i] = std::find(gold.begin(), gold.end(), dict.cui(set.candidates[i].id)) != gold.end();
  }
  return mask;
}

double marginal_probability(std::span<const double> probabilities,
                            const std::vector<bool>& positive) {
  double s = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (positive[i]) s += probabilities[i];
  }
  return s;
}

ComponentLoss component_loss(LossKind kind, std::span<const double> scores,
                             const std::vector<bool>& positive) {
  ComponentLoss out;
  const std::size_t n = scores.size();
  out.dscores.assign(n, 0.0);
  if (n == 0) {
    out.skipped = true;
    return out;
  }

  if (kind == LossKind::kPairwise) {
    for (std::size_t i = 0; i < n; ++i) {
      const double y = positive[i] ? 1.0 : 0.0;
      out.loss += positive[i] ? softplus(-scores[i]) : softplus(scores[i]);
      out.dscores[i] = sigmoid(scores[i]) - y;
    }
    out.weight = static_cast<double>(n);
    return out;
  }

  if (std::none_of(positive.begin(), positive.end(), [](bool b) { return b; })) {
    out.skipped = true;
    return out;
  }
  const double lse_all = log_sum_exp(scores, nullptr);

  if (kind == LossKind::kMml) {
    // -log P' = lse(all) - lse(positives); d/dS_i = p_i - [pos_i] q_i with q
    // the softmax restricted to positives.
    const double lse_pos = log_sum_exp(scores, &positive);
    out.loss = -(lse_pos - lse_all);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::exp(scores[i] - lse_all);
      const double q = positive[i] ? std::exp(scores[i] - lse_pos) : 0.0;
      out.dscores[i] = p - q;
    }
  } else {
    // Target is the most probable positive, first index on ties.
    std::size_t target = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (positive[i] && (target == n || scores[i] > scores[target])) target = i;
    }
    out.loss = -(scores[target] - lse_all);
    for (std::size_t i = 0; i < n; ++i) {
      out.dscores[i] = std::exp(scores[i] - lse_all) - (i == target ? 1.0 : 0.0);
    }
  }
  out.weight = 1.0;
  return out;
}

BatchLoss batch_loss(LossKind kind, std::span<const TrainingExample* const> batch,
                     std::span<const CandidateSet* const> candidates, const SynonymIndex& index,
                     const DenseEncoder& encoder, const HybridWeight& w, Gradients* grads) {
  if (batch.size() != candidates.size()) throw Error("batch_loss: batch/candidates size mismatch");
  if (batch.empty()) throw Error("batch_loss: empty batch");
  const Dictionary& dict = index.dictionary();

  struct Unit {
    ForwardState mention;
    std::vector<ForwardState> synonyms;
    std::vector<double> sparse;
    ComponentLoss terms;
  };
  std::vector<Unit> units(batch.size());
  BatchLoss out;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainingExample& ex = *batch[b];
    const CandidateSet& set = *candidates[b];
    Unit& u = units[b];
    u.mention = encoder.forward(ex.text);
    std::vector<double> scores;
    scores.reserve(set.size());
    for (const auto& c : set.candidates) {
      u.synonyms.push_back(encoder.forward(dict.name(c.id)));
      u.sparse.push_back(c.sparse_score);
      scores.push_back(combine_scores(dense_score(u.mention.output, u.synonyms.back().output),
                                      c.sparse_score, w));
    }
    u.terms = component_loss(kind, scores, positive_mask(set, ex.gold, dict));
    if (u.terms.skipped) {
      ++out.skipped;
      continue;
    }
    ++out.used;
    out.loss_sum += u.terms.loss;
    out.denominator += u.terms.weight;
  }
  if (out.denominator > 0.0) out.loss = out.loss_sum / out.denominator;
  if (!grads || out.denominator == 0.0) return out;

  const double scale = 1.0 / out.denominator;
  const std::size_t h = encoder.dim();
  for (auto& u : units) {
    if (u.terms.skipped) continue;
    DenseVector up_mention(h, 0.0);
    DenseVector up_synonym(h);
    for (std::size_t i = 0; i < u.synonyms.size(); ++i) {
      const double g = u.terms.dscores[i] * scale;
      if (g == 0.0) continue;
      const auto& syn = u.synonyms[i].output;
      for (std::size_t j = 0; j < h; ++j) {
        up_mention[j] += g * syn[j];
        up_synonym[j] = g * u.mention.output[j];
      }
      encoder.backward(u.synonyms[i], up_synonym, *grads);
      grads->lambda += g * u.sparse[i];
    }
    encoder.backward(u.mention, up_mention, *grads);
  }
  return out;
}

AdamW::AdamW(const std::vector<ParamTensor>& params, const TrainConfig& cfg)
    : lr_(cfg.learning_rate),
      weight_decay_(cfg.weight_decay),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      epsilon_(cfg.epsilon) {
  moments_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    moments_[i].m.assign(params[i].values.size(), 0.0);
    moments_[i].v.assign(params[i].values.size(), 0.0);
  }
}

void AdamW::step(std::vector<ParamTensor>& params, const Gradients& grads, HybridWeight& w) {
  if (params.size() != moments_.size() || grads.num_tensors() != params.size()) {
    throw Error("AdamW: parameter layout changed");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);

  const auto update = [&](double& theta, double& m, double& v, double g, bool decay) {
    if (decay) theta -= lr_ * weight_decay_ * theta;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g * g;
    theta -= lr_ * (m / c1) / (std::sqrt(v / c2) + epsilon_);
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& mom = moments_[i];
    const auto& g = grads.tensor(i);
    if (p.row_sparse) {
      // Rows absent from the gradient still take a step on their moments.
      auto next = g.touched.begin();
      for (std::size_t r = 0; r < p.rows; ++r) {
        const double* gr = nullptr;
        if (next != g.touched.end() && next->first == r) {
          gr = next->second.data();
          ++next;
        }
        double* theta = p.values.data() + r * p.cols;
        double* m = mom.m.data() + r * p.cols;
        double* v = mom.v.data() + r * p.cols;
        for (std::size_t j = 0; j < p.cols; ++j) {
          update(theta[j], m[j], v[j], gr ? gr[j] : 0.0, p.weight_decay);
        }
      }
    } else {
      for (std::size_t j = 0; j < p.values.size(); ++j) {
        update(p.values[j], mom.m[j], mom.v[j], g.dense[j], p.weight_decay);
      }
    }
  }
  update(w.lambda, lambda_m_, lambda_v_, grads.lambda, false);
}

std::vector<double> TrainState::train_recall_curve() const {
  std::vector<double> out;
  for (const auto& m : metrics) out.push_back(m.train_recall);
  out.push_back(final_train_recall);
  return out;
}

std::vector<double> TrainState::dev_recall_curve() const {
  std::vector<double> out;
  for (const auto& m : metrics) out.push_back(m.dev_recall.value_or(0.0));
  out.push_back(final_dev_recall.value_or(0.0));
  return out;
}

std::vector<CandidateSet> compose_all(std::span<const TrainingExample> examples,
                                      const SynonymIndex& index, const DenseEncoder& encoder,
                                      std::size_t k, double alpha, std::size_t threads) {
  std::vector<CandidateSet> sets(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    MentionRepr repr{examples[i].sparse, encoder.encode(examples[i].text)};
    sets[i] = compose_candidates(repr, index, k, alpha, examples[i].exclude);
  });
  return sets;
}

namespace {

double examples_recall(std::span<const TrainingExample> examples,
                       std::span<const CandidateSet> sets, const Dictionary& dict) {
  std::vector<std::vector<ConceptId>> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) gold.push_back(ex.gold);
  return recall_at_k(sets, gold, dict);
}

}  // namespace

TrainState train(const Dictionary& dict, const TfIdfModel& tfidf,
                 const std::vector<MentionRecord>& mentions, const TrainConfig& cfg,
                 DenseEncoder& encoder, HybridWeight& weight, const TrainHooks& hooks) {
  cfg.validate();
  if (dict.empty()) throw EmptyDictionaryError("train");

  const auto examples = make_examples(mentions, tfidf, &dict, cfg.merged_from);
  std::vector<TrainingExample> dev_examples;
  if (hooks.dev) dev_examples = make_examples(*hooks.dev, tfidf);

  SynonymIndex index(dict, tfidf);
  auto params = encoder.parameters();
  AdamW optimizer(params, cfg);
  Gradients grads(params);
  std::mt19937_64 rng(cfg.seed);

  TrainState state;
  if (hooks.on_checkpoint) hooks.on_checkpoint(0, encoder, weight);

  const auto refresh = [&](std::vector<CandidateSet>& sets, double& recall,
                           std::optional<double>& dev_recall) {
    index.refresh_dense(encoder, cfg.threads);
    sets = compose_all(examples, index, encoder, cfg.k, cfg.alpha, cfg.threads);
    recall = examples.empty() ? 0.0 : examples_recall(examples, sets, dict);
    if (hooks.dev) {
      const auto dev_sets = compose_all(dev_examples, index, encoder, cfg.k, cfg.alpha, cfg.threads);
      dev_recall = dev_examples.empty() ? 0.0 : examples_recall(dev_examples, dev_sets, dict);
    }
  };

  std::vector<std::size_t> order(examples.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochMetrics metrics;
    metrics.epoch = epoch;
    std::vector<CandidateSet> sets;
    refresh(sets, metrics.train_recall, metrics.dev_recall);

    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_in_place(order, rng);

    double loss_sum = 0.0;
    double denominator = 0.0;
    std::size_t skipped = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<const TrainingExample*> batch;
      std::vector<const CandidateSet*> batch_sets;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(&examples[order[i]]);
        batch_sets.push_back(&sets[order[i]]);
      }
      grads.clear();
      const auto result = batch_loss(cfg.loss, batch, batch_sets, index, encoder, weight, &grads);
      loss_sum += result.loss_sum;
      denominator += result.denominator;
      skipped += result.skipped;
      if (result.denominator == 0.0) ++metrics.empty_batches;
      optimizer.step(params, grads, weight);
      encoder.mark_updated();
      ++metrics.steps;
    }
    metrics.loss = denominator > 0.0 ? loss_sum / denominator : 0.0;
    metrics.skipped_fraction =
        examples.empty() ? 0.0 : static_cast<double>(skipped) / static_cast<double>(examples.size());
    metrics.lambda = weight.lambda;
    state.metrics.push_back(metrics);
    state.epochs_completed = epoch;
    if (hooks.on_epoch) hooks.on_epoch(metrics);
    if (hooks.on_checkpoint) hooks.on_checkpoint(epoch, encoder, weight);
  }

  std::vector<CandidateSet> final_sets;
  refresh(final_sets, state.final_train_recall, state.final_dev_recall);
  state.optimizer_steps = optimizer.steps();
  return state;
}

}  // namespace synorm

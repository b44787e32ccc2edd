#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synorm/corpus.hpp"
#include "synorm/dense_encoder.hpp"
#include "synorm/retrieval.hpp"
#include "synorm/scorer.hpp"
#include "synorm/sparse_encoder.hpp"

namespace synorm {

enum class LossKind { kMml, kHardEm, kPairwise };

const char* to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct TrainConfig {
  std::size_t k = 20;
  double alpha = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 1e-5;
  double weight_decay = 1e-2;
  LossKind loss = LossKind::kMml;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t threads = 1;
  // Synonym ids at or above this were merged in from training mentions. A
  // training mention never gets its own merged copy as a candidate.
  std::size_t merged_from = std::numeric_limits<std::size_t>::max();

  // Throws ConfigError.
  void validate() const;
};

// One training unit: a mention component with its gold concepts.
struct TrainingExample {
  std::string text;
  SparseVector sparse;
  std::vector<ConceptId> gold;  // sorted
  std::vector<SynonymId> exclude;  // never candidates for this example
};

// With `dict` given, merged copies (ids >= merged_from) of each component's
// own text are recorded in `exclude`.
std::vector<TrainingExample> make_examples(const std::vector<MentionRecord>& mentions,
                                           const TfIdfModel& tfidf,
                                           const Dictionary* dict = nullptr,
                                           std::size_t merged_from = std::numeric_limits<std::size_t>::max());

// Softmax with max subtraction.
std::vector<double> softmax(std::span<const double> scores);

// P(n | m) over the candidate set, scoring with the cached synonym vectors.
std::vector<double> candidate_probabilities(const MentionRepr& mention, const CandidateSet& set,
                                            const SynonymIndex& index, const HybridWeight& w);

// EQUAL(m, n) for every candidate.
std::vector<bool> positive_mask(const CandidateSet& set, std::span<const ConceptId> gold,
                                const Dictionary& dict);

// Sum of probabilities over positive candidates.
double marginal_probability(std::span<const double> probabilities, const std::vector<bool>& positive);

// Per-component loss and d(loss)/d(score). `weight` is this component's share
// of the batch denominator: 1 for mml/hard-em (0 when skipped), the number of
// candidates for pairwise.
struct ComponentLoss {
  double loss = 0.0;
  std::vector<double> dscores;
  double weight = 0.0;
  bool skipped = false;
};

ComponentLoss component_loss(LossKind kind, std::span<const double> scores,
                             const std::vector<bool>& positive);

struct BatchLoss {
  double loss = 0.0;         // mean over the denominator
  double loss_sum = 0.0;
  double denominator = 0.0;  // non-skipped components, or pairs for pairwise
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Mean loss over a batch with candidate lists fixed and scores recomputed
// from the live encoder. When `grads` is given, gradients of the mean loss
// w.r.t. encoder parameters and lambda are accumulated into it.
BatchLoss batch_loss(LossKind kind, std::span<const TrainingExample* const> batch,
                     std::span<const CandidateSet* const> candidates, const SynonymIndex& index,
                     const DenseEncoder& encoder, const HybridWeight& w, Gradients* grads);

// Adam with decoupled weight decay. Every coordinate steps every call,
// including embedding rows the batch did not touch.
class AdamW {
 public:
  AdamW(const std::vector<ParamTensor>& params, const TrainConfig& cfg);

  void step(std::vector<ParamTensor>& params, const Gradients& grads, HybridWeight& w);
  std::uint64_t steps() const { return step_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  double lr_;
  double weight_decay_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::uint64_t step_ = 0;
  std::vector<Moments> moments_;
  double lambda_m_ = 0.0;
  double lambda_v_ = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;           // 1-based
  double loss = 0.0;               // mean loss over non-skipped units
  double skipped_fraction = 0.0;
  std::size_t steps = 0;
  double train_recall = 0.0;       // candidates used in this epoch
  std::optional<double> dev_recall;
  double lambda = 0.0;             // after the epoch
  std::size_t empty_batches = 0;   // batches where every unit was skipped
};

struct TrainState {
  std::size_t epochs_completed = 0;
  std::vector<EpochMetrics> metrics;
  // Recall of candidates composed with the final parameters.
  double final_train_recall = 0.0;
  std::optional<double> final_dev_recall;
  std::uint64_t optimizer_steps = 0;

  // Candidate recall with the parameters after e epochs, e in [0, epochs].
  std::vector<double> train_recall_curve() const;
  std::vector<double> dev_recall_curve() const;
};

struct TrainHooks {
  const std::vector<MentionRecord>* dev = nullptr;
  // Called with epoch 0 before training and after every epoch.
  std::function<void(std::size_t epoch, const DenseEncoder&, const HybridWeight&)> on_checkpoint;
  std::function<void(const EpochMetrics&)> on_epoch;
};

// Composes candidate sets for every example with the current encoder.
std::vector<CandidateSet> compose_all(std::span<const TrainingExample> examples,
                                      const SynonymIndex& index, const DenseEncoder& encoder,
                                      std::size_t k, double alpha, std::size_t threads);

// Synonym marginalization training. `dict` should already contain the merged
// training mentions. Mutates `encoder` and `weight` in place.
TrainState train(const Dictionary& dict, const TfIdfModel& tfidf,
                 const std::vector<MentionRecord>& mentions, const TrainConfig& cfg,
                 DenseEncoder& encoder, HybridWeight& weight, const TrainHooks& hooks = {});

}  // namespace synorm

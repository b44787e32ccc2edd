#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synorm {

using DenseVector = std::vector<double>;

// Inner product. Throws Error on dimension mismatch.
double dense_score(std::span<const double> a, std::span<const double> b);

// A trainable tensor as seen by the optimizer. Row-sparse tensors (embedding
// tables) receive gradients only for touched rows.
struct ParamTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<double> values;
  bool weight_decay = true;
  bool row_sparse = false;
};

struct TensorGrad {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool row_sparse = false;
  std::vector<double> dense;                          // rows * cols, when !row_sparse
  std::map<std::uint32_t, std::vector<double>> touched;  // when row_sparse
};

// Gradient buffers shaped like an encoder's parameters plus the hybrid weight.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const std::vector<ParamTensor>& params);

  std::size_t num_tensors() const { return tensors_.size(); }
  TensorGrad& tensor(std::size_t i) { return tensors_[i]; }
  const TensorGrad& tensor(std::size_t i) const { return tensors_[i]; }

  std::span<double> dense(std::size_t i) { return tensors_[i].dense; }
  // Zero-initialised on first touch.
  std::span<double> row(std::size_t i, std::uint32_t r);

  // Value of d(loss)/d(param) at flat coordinate (row-major); zero for
  // untouched sparse rows.
  double at(std::size_t tensor, std::size_t flat) const;

  double lambda = 0.0;

  void clear();
  void scale(double factor);
  bool all_zero() const;

 private:
  std::vector<TensorGrad> tensors_;
};

// Activations kept from a forward pass. `version` pins the parameter snapshot
// the state was computed with; the other buffers are encoder-private.
struct ForwardState {
  std::uint64_t version = 0;
  DenseVector output;
  std::vector<double> hidden;
  std::vector<std::uint32_t> rows;
};

// Contract every dense encoder implements. The retrieval and training code
// only goes through this interface.
class DenseEncoder {
 public:
  virtual ~DenseEncoder() = default;

  virtual std::size_t dim() const = 0;
  virtual DenseVector encode(std::string_view text) const = 0;
  virtual ForwardState forward(std::string_view text) const = 0;

  // Accumulates d(loss)/d(params) given d(loss)/d(output). Throws Error if
  // the state belongs to an older parameter version.
  virtual void backward(const ForwardState& state, std::span<const double> upstream,
                        Gradients& grads) const = 0;

  virtual std::vector<ParamTensor> parameters() = 0;
  virtual std::uint64_t version() const = 0;
  // Called after parameters were modified in place.
  virtual void mark_updated() = 0;

  void backward(std::span<const ForwardState> states, std::span<const DenseVector> upstream,
                Gradients& grads) const;

  Gradients make_gradients() {
    return Gradients(parameters());
  }
};

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t buckets = 65536;
  std::size_t ngram_order = 3;
  std::uint64_t seed = 0;
  std::size_t max_chars = 100;
  double init_scale = 0.05;

  void validate() const;
};

// 64-bit FNV-1a over the bytes of `s`.
std::uint64_t fnv1a64(std::string_view s);

// Hashed character-trigram embedding bag followed by tanh(W p + b).
//
// p is the mean of E[bucket(g)] over the text's character n-grams g (after
// truncation to max_chars code points). Bucket 0 is reserved for texts too
// short to yield an n-gram; other n-grams land in 1 + fnv1a(g) % (B - 1).
class HashedNgramEncoder final : public DenseEncoder {
 public:
  explicit HashedNgramEncoder(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }

  std::size_t dim() const override { return cfg_.dim; }
  DenseVector encode(std::string_view text) const override;
  ForwardState forward(std::string_view text) const override;
  void backward(const ForwardState& state, std::span<const double> upstream,
                Gradients& grads) const override;
  using DenseEncoder::backward;

  std::vector<ParamTensor> parameters() override;
  std::uint64_t version() const override { return version_; }
  void mark_updated() override { ++version_; }

  std::vector<std::uint32_t> buckets_for(std::string_view text) const;

  std::span<double> embeddings() { return embeddings_; }
  std::span<const double> embeddings() const { return embeddings_; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }

  // Checkpoint: text header (format, dims, seed, update count, lambda)
  // terminated by "end\n", then E, W, b as little-endian float64.
  void save(const std::filesystem::path& path, double lambda) const;
  std::string serialize(double lambda) const;

  struct Loaded;
  static Loaded load(const std::filesystem::path& path);

  friend bool operator==(const HashedNgramEncoder& a, const HashedNgramEncoder& b);

 private:
  EncoderConfig cfg_;
  std::vector<double> embeddings_;  // buckets x dim
  std::vector<double> weights_;     // dim x dim, row-major
  std::vector<double> bias_;        // dim
  std::uint64_t version_ = 0;
};

struct HashedNgramEncoder::Loaded {
  HashedNgramEncoder encoder;
  double lambda = 1.0;
};

}  // namespace synorm

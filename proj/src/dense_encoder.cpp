#include "synorm/dense_encoder.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "synorm/error.hpp"
#include "synorm/utf8.hpp"

namespace synorm {

namespace {

constexpr std::string_view kMagic = "synorm-dense 1";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Uniform double in [0, 1) from the top 53 bits; portable across standard
// libraries, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void append_le(std::string& out, std::span<const double> values) {
  const std::size_t offset = out.size();
  out.resize(offset + values.size() * sizeof(double));
  char* dst = out.data() + offset;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) *dst++ = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
}

void read_le(std::string_view src, std::span<double> values) {
  const char* p = src.data();
  for (double& v : values) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(*p++)) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
}

}  // namespace

double dense_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("dense_score: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Gradients::Gradients(const std::vector<ParamTensor>& params) {
  tensors_.reserve(params.size());
  for (const auto& p : params) {
    TensorGrad g;
    g.rows = p.rows;
    g.cols = p.cols;
    g.row_sparse = p.row_sparse;
    if (!p.row_sparse) g.dense.assign(p.rows * p.cols, 0.0);
    tensors_.push_back(std::move(g));
  }
}

std::span<double> Gradients::row(std::size_t i, std::uint32_t r) {
  auto& t = tensors_[i];
  if (!t.row_sparse) return std::span<double>(t.dense).subspan(std::size_t{r} * t.cols, t.cols);
  auto [it, inserted] = t.touched.try_emplace(r);
  if (inserted) it->second.assign(t.cols, 0.0);
  return it->second;
}

double Gradients::at(std::size_t tensor, std::size_t flat) const {
  const auto& t = tensors_[tensor];
  if (!t.row_sparse) return t.dense[flat];
  auto it = t.touched.find(static_cast<std::uint32_t>(flat / t.cols));
  return it == t.touched.end() ? 0.0 : it->second[flat % t.cols];
}

void Gradients::clear() {
  for (auto& t : tensors_) {
    std::fill(t.dense.begin(), t.dense.end(), 0.0);
    t.touched.clear();
  }
  lambda = 0.0;
}

void Gradients::scale(double factor) {
  for (auto& t : tensors_) {
    for (double& x : t.dense) x *= factor;
    for (auto& [r, values] : t.touched) {
      for (double& x : values) x *= factor;
    }
  }
  lambda *= factor;
}

bool Gradients::all_zero() const {
  const auto zero = [](double x) { return x == 0.0; };
  for (const auto& t : tensors_) {
    if (!std::all_of(t.dense.begin(), t.dense.end(), zero)) return false;
    for (const auto& [r, values] : t.touched) {
      if (!std::all_of(values.begin(), values.end(), zero)) return false;
    }
  }
  return lambda == 0.0;
}

void DenseEncoder::backward(std::span<const ForwardState> states,
                            std::span<const DenseVector> upstream, Gradients& grads) const {
  if (states.size() != upstream.size()) throw Error("backward: states/upstream size mismatch");
  for (std::size_t i = 0; i < states.size(); ++i) backward(states[i], upstream[i], grads);
}

void EncoderConfig::validate() const {
  if (dim < 1) throw ConfigError("encoder dim must be >= 1");
  if (buckets < 2) throw ConfigError("encoder buckets must be >= 2");
  if (ngram_order < 1) throw ConfigError("encoder ngram_order must be >= 1");
  if (max_chars < 1) throw ConfigError("encoder max_chars must be >= 1");
  if (buckets > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("encoder buckets must fit in 32 bits");
  }
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

HashedNgramEncoder::HashedNgramEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t h = cfg_.dim;
  embeddings_.resize(cfg_.buckets * h);
  weights_.resize(h * h);
  bias_.assign(h, 0.0);
  std::mt19937_64 rng(cfg_.seed);
  for (double& x : embeddings_) x = (2.0 * unit_uniform(rng) - 1.0) * cfg_.init_scale;
  for (double& x : weights_) x = (2.0 * unit_uniform(rng) - 1.0) * cfg_.init_scale;
}

std::vector<std::uint32_t> HashedNgramEncoder::buckets_for(std::string_view text) const {
  auto bounds = utf8::boundaries(text);
  if (bounds.size() - 1 > cfg_.max_chars) bounds.resize(cfg_.max_chars + 1);
  const std::size_t n = bounds.size() - 1;
  const std::size_t order = cfg_.ngram_order;
  std::vector<std::uint32_t> rows;
  if (n >= order && cfg_.buckets > 1) {
    rows.reserve(n - order + 1);
    for (std::size_t i = 0; i + order <= n; ++i) {
      const auto gram = text.substr(bounds[i], bounds[i + order] - bounds[i]);
      rows.push_back(static_cast<std::uint32_t>(1 + fnv1a64(gram) % (cfg_.buckets - 1)));
    }
  }
  if (rows.empty()) rows.push_back(0);
  return rows;
}

ForwardState HashedNgramEncoder::forward(std::string_view text) const {
  const std::size_t h = cfg_.dim;
  ForwardState st;
  st.version = version_;
  st.rows = buckets_for(text);
  st.hidden.assign(h, 0.0);
  for (std::uint32_t r : st.rows) {
    const double* e = embeddings_.data() + std::size_t{r} * h;
    for (std::size_t j = 0; j < h; ++j) st.hidden[j] += e[j];
  }
  const double inv = 1.0 / static_cast<double>(st.rows.size());
  for (double& x : st.hidden) x *= inv;

  st.output.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double* w = weights_.data() + i * h;
    double z = bias_[i];
    for (std::size_t j = 0; j < h; ++j) z += w[j] * st.hidden[j];
    st.output[i] = std::tanh(z);
  }
  return st;
}

DenseVector HashedNgramEncoder::encode(std::string_view text) const {
  return forward(text).output;
}

void HashedNgramEncoder::backward(const ForwardState& state, std::span<const double> upstream,
                                  Gradients& grads) const {
  if (state.version != version_) {
    throw Error("backward: forward state is stale (params version " +
                std::to_string(state.version) + ", current " + std::to_string(version_) + ")");
  }
  const std::size_t h = cfg_.dim;
  if (upstream.size() != h || state.output.size() != h) throw Error("backward: bad gradient size");
  if (grads.num_tensors() != 3) throw Error("backward: gradient buffer does not match encoder");

  std::vector<double> dz(h);
  bool any = false;
  for (std::size_t i = 0; i < h; ++i) {
    dz[i] = upstream[i] * (1.0 - state.output[i] * state.output[i]);
    any = any || dz[i] != 0.0;
  }
  if (!any) return;

  auto dw = grads.dense(1);
  auto db = grads.dense(2);
  std::vector<double> dp(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    db[i] += dz[i];
    double* dwi = dw.data() + i * h;
    const double* wi = weights_.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) {
      dwi[j] += dz[i] * state.hidden[j];
      dp[j] += wi[j] * dz[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(state.rows.size());
  for (std::uint32_t r : state.rows) {
    auto de = grads.row(0, r);
    for (std::size_t j = 0; j < h; ++j) de[j] += dp[j] * inv;
  }
}

std::vector<ParamTensor> HashedNgramEncoder::parameters() {
  const std::size_t h = cfg_.dim;
  return {
      {"embeddings", cfg_.buckets, h, embeddings_, true, true},
      {"weights", h, h, weights_, true, false},
      {"bias", 1, h, bias_, false, false},
  };
}

std::string HashedNgramEncoder::serialize(double lambda) const {
  std::ostringstream header;
  header << kMagic << '\n'
         << "dim " << cfg_.dim << '\n'
         << "buckets " << cfg_.buckets << '\n'
         << "ngram_order " << cfg_.ngram_order << '\n'
         << "max_chars " << cfg_.max_chars << '\n'
         << "seed " << cfg_.seed << '\n'
         << "init_scale " << format_double(cfg_.init_scale) << '\n'
         << "updates " << version_ << '\n'
         << "lambda " << format_double(lambda) << '\n'
         << "end\n";
  std::string out = header.str();
  append_le(out, embeddings_);
  append_le(out, weights_);
  append_le(out, bias_);
  return out;
}

void HashedNgramEncoder::save(const std::filesystem::path& path, double lambda) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  const std::string bytes = serialize(lambda);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

HashedNgramEncoder::Loaded HashedNgramEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  const std::string source = path.string();
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != kMagic) throw ParseError(source, 1, "not a checkpoint");
  ++lineno;

  EncoderConfig cfg;
  std::uint64_t updates = 0;
  double lambda = 1.0;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw ParseError(source, lineno, "expected 'key value'");
    const std::string key = line.substr(0, sp);
    const std::string_view value = std::string_view(line).substr(sp + 1);
    const auto parse_u = [&](auto& dst) {
      std::uint64_t v = 0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw ParseError(source, lineno, "bad integer for " + key);
      }
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(v);
    };
    const auto parse_d = [&](double& dst) {
      auto res = std::from_chars(value.data(), value.data() + value.size(), dst);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw ParseError(source, lineno, "bad number for " + key);
      }
    };
    if (key == "dim") parse_u(cfg.dim);
    else if (key == "buckets") parse_u(cfg.buckets);
    else if (key == "ngram_order") parse_u(cfg.ngram_order);
    else if (key == "max_chars") parse_u(cfg.max_chars);
    else if (key == "seed") parse_u(cfg.seed);
    else if (key == "init_scale") parse_d(cfg.init_scale);
    else if (key == "updates") parse_u(updates);
    else if (key == "lambda") parse_d(lambda);
    else throw ParseError(source, lineno, "unknown header key '" + key + "'");
  }
  if (!ended) throw ParseError(source, lineno, "missing 'end' header line");
  if (!std::isfinite(lambda)) throw ParseError(source, lineno, "lambda is not finite");

  Loaded loaded{HashedNgramEncoder(cfg), lambda};
  auto& enc = loaded.encoder;
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected =
      (enc.embeddings_.size() + enc.weights_.size() + enc.bias_.size()) * sizeof(double);
  if (payload.size() != expected) {
    throw Error("checkpoint " + source + ": payload has " + std::to_string(payload.size()) +
                " bytes, expected " + std::to_string(expected));
  }
  std::string_view rest = payload;
  read_le(rest, enc.embeddings_);
  rest.remove_prefix(enc.embeddings_.size() * sizeof(double));
  read_le(rest, enc.weights_);
  rest.remove_prefix(enc.weights_.size() * sizeof(double));
  read_le(rest, enc.bias_);
  enc.version_ = updates;
  return loaded;
}

bool operator==(const HashedNgramEncoder& a, const HashedNgramEncoder& b) {
  return a.cfg_.dim == b.cfg_.dim && a.cfg_.buckets == b.cfg_.buckets &&
         a.cfg_.ngram_order == b.cfg_.ngram_order && a.cfg_.max_chars == b.cfg_.max_chars &&
         a.cfg_.seed == b.cfg_.seed && a.embeddings_ == b.embeddings_ &&
         a.weights_ == b.weights_ && a.bias_ == b.bias_;
}

}  // namespace synorm

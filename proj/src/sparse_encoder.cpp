#include "synorm/sparse_encoder.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "synorm/error.hpp"
#include "synorm/utf8.hpp"

namespace synorm {

namespace {

constexpr std::string_view kMagic = "synorm-tfidf 1";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& source, std::size_t line) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(source, line, "bad number '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, const std::string& source, std::size_t line) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(source, line, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::vector<std::string> char_ngrams(std::string_view text, std::size_t min_order,
                                     std::size_t max_order) {
  const auto bounds = utf8::boundaries(text);
  const std::size_t n = bounds.size() - 1;
  std::vector<std::string> out;
  for (std::size_t order = min_order; order <= max_order; ++order) {
    if (order == 0 || order > n) continue;
    for (std::size_t i = 0; i + order <= n; ++i) {
      out.emplace_back(text.substr(bounds[i], bounds[i + order] - bounds[i]));
    }
  }
  return out;
}

TfIdfModel fit_tfidf(const Dictionary& dict, const TfIdfOptions& opts) {
  if (dict.empty()) throw EmptyDictionaryError("fit_tfidf");
  if (opts.min_order == 0 || opts.min_order > opts.max_order) {
    throw ConfigError("invalid n-gram orders");
  }
  std::map<std::string, std::size_t, std::less<>> df;
  for (const auto& e : dict.entries()) {
    auto grams = char_ngrams(e.name, opts.min_order, opts.max_order);
    std::set<std::string> distinct(grams.begin(), grams.end());
    for (const auto& g : distinct) ++df[g];
  }

  TfIdfModel model;
  model.opts_ = opts;
  model.num_docs_ = dict.size();
  model.ngrams_.reserve(df.size());
  model.idf_.reserve(df.size());
  const double n = static_cast<double>(dict.size());
  for (const auto& [gram, count] : df) {
    const auto index = static_cast<std::uint32_t>(model.ngrams_.size());
    model.vocab_.emplace(gram, index);
    model.ngrams_.push_back(gram);
    model.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

std::int64_t TfIdfModel::find(std::string_view ngram) const {
  auto it = vocab_.find(ngram);
  return it == vocab_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

SparseVector TfIdfModel::encode(std::string_view text) const {
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& g : char_ngrams(text, opts_.min_order, opts_.max_order)) {
    auto it = vocab_.find(g);
    if (it != vocab_.end()) ++counts[it->second];
  }
  SparseVector v;
  v.indices.reserve(counts.size());
  v.values.reserve(counts.size());
  double norm2 = 0.0;
  for (const auto& [index, tf] : counts) {
    const double w = static_cast<double>(tf) * idf_[index];
    v.indices.push_back(index);
    v.values.push_back(w);
    norm2 += w * w;
  }
  if (opts_.l2_normalize && norm2 > 0.0) {
    const double norm = std::sqrt(norm2);
    for (double& x : v.values) x /= norm;
  }
  return v;
}

double sparse_score(const SparseVector& a, const SparseVector& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  double s = 0.0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] == b.indices[j]) {
      s += a.values[i] * b.values[j];
      ++i;
      ++j;
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

// Layout:
//   synorm-tfidf 1
//   orders <min> <max>
//   normalize <0|1>
//   documents <|N|>
//   features <count>
//   <blank line>
//   ngram \t index \t idf      (one per feature)
void TfIdfModel::save(std::ostream& out) const {
  out << kMagic << '\n'
      << "orders " << opts_.min_order << ' ' << opts_.max_order << '\n'
      << "normalize " << (opts_.l2_normalize ? 1 : 0) << '\n'
      << "documents " << num_docs_ << '\n'
      << "features " << ngrams_.size() << '\n'
      << '\n';
  for (std::size_t i = 0; i < ngrams_.size(); ++i) {
    out << ngrams_[i] << '\t' << i << '\t' << format_double(idf_[i]) << '\n';
  }
}

TfIdfModel TfIdfModel::load(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  const auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(source, lineno + 1, "unexpected end of file");
    ++lineno;
    return line;
  };
  const auto field = [&](std::string_view key) -> std::string_view {
    std::string_view l = next();
    if (l.substr(0, key.size()) != key || l.size() <= key.size() || l[key.size()] != ' ') {
      throw ParseError(source, lineno, "expected '" + std::string(key) + "'");
    }
    return l.substr(key.size() + 1);
  };

  if (next() != kMagic) throw ParseError(source, lineno, "not a tf-idf model file");
  TfIdfModel model;
  {
    std::string_view orders = field("orders");
    const auto sp = orders.find(' ');
    if (sp == std::string_view::npos) throw ParseError(source, lineno, "expected two orders");
    model.opts_.min_order = parse_uint(orders.substr(0, sp), source, lineno);
    model.opts_.max_order = parse_uint(orders.substr(sp + 1), source, lineno);
  }
  model.opts_.l2_normalize = parse_uint(field("normalize"), source, lineno) != 0;
  model.num_docs_ = parse_uint(field("documents"), source, lineno);
  const std::size_t count = parse_uint(field("features"), source, lineno);
  if (!next().empty()) throw ParseError(source, lineno, "expected blank separator line");

  model.ngrams_.reserve(count);
  model.idf_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string_view l = next();
    const auto t1 = l.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : l.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw ParseError(source, lineno, "expected 3 columns");
    if (parse_uint(l.substr(t1 + 1, t2 - t1 - 1), source, lineno) != i) {
      throw ParseError(source, lineno, "feature indices must be dense and ordered");
    }
    const double idf = parse_double(l.substr(t2 + 1), source, lineno);
    if (!(idf > 0.0)) throw ParseError(source, lineno, "idf must be positive");
    std::string gram(l.substr(0, t1));
    if (!model.ngrams_.empty() && !(model.ngrams_.back() < gram)) {
      throw ParseError(source, lineno, "n-grams must be strictly increasing");
    }
    model.vocab_.emplace(gram, static_cast<std::uint32_t>(i));
    model.ngrams_.push_back(std::move(gram));
    model.idf_.push_back(idf);
  }
  return model;
}

void TfIdfModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write tf-idf model: " + path.string());
  save(out);
}

TfIdfModel TfIdfModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open tf-idf model: " + path.string());
  return load(in, path.string());
}

}  // namespace synorm

#pragma once

#include <span>

#include "synorm/dense_encoder.hpp"
#include "synorm/sparse_encoder.hpp"

namespace synorm {

// Trainable weight on the sparse score. Starts at 1.0.
struct HybridWeight {
  double lambda = 1.0;
};

// S(m, n) = dense(m, n) + lambda * sparse(m, n), from precomputed parts.
inline double combine_scores(double dense, double sparse, const HybridWeight& w) {
  return dense + w.lambda * sparse;
}

double score(const SparseVector& m_sparse, std::span<const double> m_dense,
             const SparseVector& n_sparse, std::span<const double> n_dense,
             const HybridWeight& w);

}  // namespace synorm

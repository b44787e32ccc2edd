#include "synorm/scorer.hpp"

namespace synorm {

double score(const SparseVector& m_sparse, std::span<const double> m_dense,
             const SparseVector& n_sparse, std::span<const double> n_dense,
             const HybridWeight& w) {
  return combine_scores(dense_score(m_dense, n_dense), sparse_score(m_sparse, n_sparse), w);
}

}  // namespace synorm

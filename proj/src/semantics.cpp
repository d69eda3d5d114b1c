#include "tagseg/semantics.hpp"

#include <algorithm>
#include <stdexcept>

namespace tagseg {

double jaccard(const LabelSet& a, const LabelSet& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("jaccard of an empty label set");
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++common;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

SemanticAffinity build_affinity(const std::vector<LabelSet>& sets) {
  const Eigen::Index n = static_cast<Eigen::Index>(sets.size());
  SemanticAffinity affinity;
  affinity.similarity.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    affinity.similarity(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = jaccard(sets[static_cast<std::size_t>(i)], sets[static_cast<std::size_t>(j)]);
      affinity.similarity(i, j) = s;
      affinity.similarity(j, i) = s;
    }
  }
  affinity.degrees = affinity.similarity.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = affinity.degrees.cwiseSqrt().cwiseInverse();
  affinity.laplacian =
      inv_sqrt.asDiagonal() *
      (Eigen::MatrixXd(affinity.degrees.asDiagonal()) - affinity.similarity) *
      inv_sqrt.asDiagonal();
  // Symmetrize away round-off so eigensolvers see an exactly symmetric matrix.
  affinity.laplacian = 0.5 * (affinity.laplacian + affinity.laplacian.transpose()).eval();
  return affinity;
}

Eigen::VectorXd dissimilarity_diag(const LabelSet& target_labels,
                                   const std::vector<LabelSet>& sets) {
  if (target_labels.empty()) throw std::invalid_argument("empty target label set");
  Eigen::VectorXd d(static_cast<Eigen::Index>(sets.size()));
  for (std::size_t k = 0; k < sets.size(); ++k)
    d(static_cast<Eigen::Index>(k)) = 1.0 - jaccard(target_labels, sets[k]);
  return d;
}

Eigen::MatrixXd constraint_matrix(const SemanticAffinity& affinity,
                                  const Eigen::VectorXd& dissimilarity, double lambda) {
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  if (dissimilarity.size() != affinity.laplacian.rows())
    throw std::invalid_argument("dissimilarity size mismatch");
  Eigen::MatrixXd constraint = 2.0 * affinity.laplacian;
  constraint.diagonal() += 2.0 * lambda * dissimilarity;
  return constraint;
}

}  // namespace tagseg

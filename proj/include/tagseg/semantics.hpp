#pragma once

#include <Eigen/Core>
#include <vector>

#include "tagseg/dataset.hpp"

namespace tagseg {

/// |a ∩ b| / |a ∪ b| for sorted label sets. Throws on an empty set.
double jaccard(const LabelSet& a, const LabelSet& b);

/// Pairwise tag affinity of a database and its normalized Laplacian
/// A^{-1/2} (A - S) A^{-1/2}, where A is the diagonal of row sums of S.
struct SemanticAffinity {
  Eigen::MatrixXd similarity;  // S, symmetric, unit diagonal
  Eigen::VectorXd degrees;     // row sums of S
  Eigen::MatrixXd laplacian;   // PSD, eigenvalues in [0, 2]
};

SemanticAffinity build_affinity(const std::vector<LabelSet>& sets);

/// Entry k is 1 - jaccard(target_labels, sets[k]).
Eigen::VectorXd dissimilarity_diag(const LabelSet& target_labels,
                                   const std::vector<LabelSet>& sets);

/// 2 * (laplacian + lambda * diag(dissimilarity)); PSD for lambda >= 0.
Eigen::MatrixXd constraint_matrix(const SemanticAffinity& affinity,
                                  const Eigen::VectorXd& dissimilarity, double lambda);

}  // namespace tagseg

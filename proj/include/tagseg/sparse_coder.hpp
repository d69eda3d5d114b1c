#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "tagseg/errors.hpp"

namespace tagseg {

/// Proximal-gradient settings for the coefficient solver.
template <typename Scalar = double>
struct CoderConfig {
  Scalar beta = Scalar(0.1);    // L1 weight
  Scalar gamma = Scalar(0.2);   // semantic-constraint weight
  Scalar sigma = Scalar(1e-5);  // stop when the iterate step falls below this
  int max_iters = 1000;
  Scalar initial_lipschitz = Scalar(1);
  Scalar lipschitz_growth = Scalar(2);
  Scalar step_factor = Scalar(1);  // in (0, 1]
  bool random_init = false;        // default start is the zero vector
  unsigned seed = 0;

  void validate() const {
    if (beta < 0) throw std::invalid_argument("beta must be nonnegative");
    if (gamma < 0) throw std::invalid_argument("gamma must be nonnegative");
    if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
    if (initial_lipschitz <= 0) throw std::invalid_argument("initial_lipschitz must be positive");
    if (lipschitz_growth <= 1) throw std::invalid_argument("lipschitz_growth must exceed 1");
    if (step_factor <= 0 || step_factor > 1)
      throw std::invalid_argument("step_factor must lie in (0, 1]");
  }
};

template <typename Scalar = double>
struct SemanticCode {
  Eigen::Vector<Scalar, Eigen::Dynamic> alpha;
  std::vector<Scalar> energy_trace;  // objective value per accepted iterate
  int iterations = 0;
  bool converged = false;
};

/// Database entries selected from a solved code: indices ordered by
/// descending weight, and the code with non-selected entries zeroed.
template <typename Scalar = double>
struct ReferenceSet {
  std::vector<int> indices;
  Eigen::Vector<Scalar, Eigen::Dynamic> weights;
  Eigen::Vector<Scalar, Eigen::Dynamic> alpha_masked;
};

/// 1/2 ||f - B a||^2 + beta ||a||_1 + gamma/2 a' C a.
template <typename DerivedA, typename DerivedF, typename DerivedB, typename DerivedC>
typename DerivedB::Scalar energy_alpha(const Eigen::MatrixBase<DerivedA>& alpha,
                                       const Eigen::MatrixBase<DerivedF>& target_feature,
                                       const Eigen::MatrixBase<DerivedB>& codebook,
                                       const Eigen::MatrixBase<DerivedC>& constraint,
                                       typename DerivedB::Scalar beta,
                                       typename DerivedB::Scalar gamma) {
  using Scalar = typename DerivedB::Scalar;
  if (codebook.rows() != target_feature.size() || codebook.cols() != alpha.size() ||
      constraint.rows() != alpha.size() || constraint.cols() != alpha.size())
    throw std::invalid_argument("energy_alpha: dimension mismatch");
  const Scalar reconstruction = (target_feature - codebook * alpha).squaredNorm();
  return Scalar(0.5) * reconstruction + beta * alpha.template lpNorm<1>() +
         Scalar(0.5) * gamma * alpha.dot(constraint * alpha);
}

/// Componentwise soft threshold sign(v) * max(|v| - t, 0).
template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> prox_l1(
    const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  if (threshold <= 0) throw std::invalid_argument("prox_l1 threshold must be positive");
  const auto a = v.derived().array();
  return (a > threshold)
      .select(a - threshold, (a < -threshold).select(a + threshold, Scalar(0)))
      .matrix();
}

/// Proximal gradient with backtracking on the smooth part
/// g(a) = 1/2 ||f - B a||^2 + gamma/2 a' C a. The Lipschitz estimate grows by
/// a constant factor until the quadratic majorization holds, the iterate moves
/// by step_factor toward the prox point, and iteration stops when the step
/// norm drops to sigma. The energy trace never increases.
template <typename DerivedF, typename DerivedB, typename DerivedC>
SemanticCode<typename DerivedB::Scalar> solve_code(
    const Eigen::MatrixBase<DerivedF>& target_feature,
    const Eigen::MatrixBase<DerivedB>& codebook, const Eigen::MatrixBase<DerivedC>& constraint,
    const CoderConfig<typename DerivedB::Scalar>& config) {
  using Scalar = typename DerivedB::Scalar;
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
  config.validate();
  const Eigen::Index n = codebook.cols();
  if (codebook.rows() != target_feature.size() || constraint.rows() != n ||
      constraint.cols() != n)
    throw std::invalid_argument("solve_code: dimension mismatch");

  SemanticCode<Scalar> code;
  if (config.random_init) {
    std::mt19937 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    code.alpha.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      code.alpha(i) = Scalar(normal(rng)) / std::sqrt(Scalar(n));
  } else {
    code.alpha = Vector::Zero(n);
  }

  const auto smooth = [&](const Vector& a) -> Scalar {
    return Scalar(0.5) * (target_feature - codebook * a).squaredNorm() +
           Scalar(0.5) * config.gamma * a.dot(constraint * a);
  };
  const auto full = [&](const Vector& a) -> Scalar {
    return smooth(a) + config.beta * a.template lpNorm<1>();
  };

  Scalar energy = full(code.alpha);
  if (!std::isfinite(energy)) throw NumericalError("non-finite energy at the initial point");
  code.energy_trace.push_back(energy);

  Scalar lipschitz = config.initial_lipschitz;
  Vector gradient(n), candidate(n), next(n);
  for (int iter = 0; iter < config.max_iters; ++iter) {
    gradient.noalias() = codebook.transpose() * (codebook * code.alpha - target_feature);
    gradient.noalias() += config.gamma * (constraint * code.alpha);
    const Scalar smooth_here = smooth(code.alpha);

    // Backtracking: raise the curvature estimate until the majorization holds.
    for (;;) {
      if (config.beta > 0)
        candidate = prox_l1((code.alpha - gradient / lipschitz).eval(), config.beta / lipschitz);
      else
        candidate = code.alpha - gradient / lipschitz;
      const Vector delta = candidate - code.alpha;
      const Scalar majorant = smooth_here + gradient.dot(delta) +
                              Scalar(0.5) * lipschitz * delta.squaredNorm();
      if (smooth(candidate) <= majorant + Scalar(1e-12)) break;
      lipschitz *= config.lipschitz_growth;
      if (lipschitz > Scalar(1e300)) throw NumericalError("curvature estimate diverged");
    }

    next = code.alpha + config.step_factor * (candidate - code.alpha);
    const Scalar step = (next - code.alpha).norm();
    code.alpha = next;
    energy = full(code.alpha);
    if (!std::isfinite(energy)) throw NumericalError("non-finite energy during iteration");
    code.energy_trace.push_back(energy);
    code.iterations = iter + 1;
    if (step <= config.sigma) {
      code.converged = true;
      break;
    }
  }
  return code;
}

/// Keeps the at most `max_references` largest entries strictly above
/// `threshold`, ordered by descending weight (ties to the lower index).
template <typename Derived>
ReferenceSet<typename Derived::Scalar> select_references(const Eigen::MatrixBase<Derived>& alpha,
                                                         int max_references,
                                                         typename Derived::Scalar threshold = 0) {
  using Scalar = typename Derived::Scalar;
  if (max_references < 1) throw std::invalid_argument("max_references must be positive");
  if (threshold < 0) throw std::invalid_argument("threshold must be nonnegative");

  std::vector<int> order;
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (alpha(i) > threshold) order.push_back(static_cast<int>(i));
  if (order.empty()) throw DataError("no references retrieved");

  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (alpha(a) != alpha(b)) return alpha(a) > alpha(b);
    return a < b;
  });
  if (static_cast<int>(order.size()) > max_references) order.resize(static_cast<std::size_t>(max_references));

  ReferenceSet<Scalar> selected;
  selected.indices = order;
  selected.weights.resize(static_cast<Eigen::Index>(order.size()));
  selected.alpha_masked = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(alpha.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    selected.weights(static_cast<Eigen::Index>(i)) = alpha(order[i]);
    selected.alpha_masked(order[i]) = alpha(order[i]);
  }
  return selected;
}

template <typename Scalar>
ReferenceSet<Scalar> select_references(const SemanticCode<Scalar>& code, int max_references,
                                       Scalar threshold = 0) {
  return select_references(code.alpha, max_references, threshold);
}

}  // namespace tagseg

#include "kktleak/nnls.hpp"

#include "kktleak/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <limits>
#include <vector>

namespace kktleak {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Unconstrained minimizer over the passive set, zero elsewhere.
VectorXd solve_passive(const MatrixXd& gram, const VectorXd& c,
                       const std::vector<bool>& passive) {
  std::vector<Index> idx;
  for (Index i = 0; i < c.size(); ++i) {
    if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
  }
  const Index p = static_cast<Index>(idx.size());
  MatrixXd g(p, p);
  VectorXd rhs(p);
  for (Index a = 0; a < p; ++a) {
    rhs(a) = c(idx[a]);
    for (Index b = 0; b < p; ++b) g(a, b) = gram(idx[a], idx[b]);
  }
  const VectorXd s = g.completeOrthogonalDecomposition().solve(rhs);
  VectorXd out = VectorXd::Zero(c.size());
  for (Index a = 0; a < p; ++a) out(idx[a]) = s(a);
  return out;
}

}  // namespace

NnlsResult nnls_gram(const MatrixXd& gram, const VectorXd& c, double tol,
                     int max_iterations) {
  const Index n = c.size();
  if (gram.rows() != n || gram.cols() != n) {
    throw DimensionMismatch("nnls: Gram matrix must be square and match c");
  }
  NnlsResult result;
  result.x = VectorXd::Zero(n);
  if (n == 0) {
    result.converged = true;
    return result;
  }
  const double thresh = tol * std::max(1.0, c.cwiseAbs().maxCoeff());
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  VectorXd& x = result.x;

  while (result.iterations < max_iterations) {
    const VectorXd w = c - gram * x;
    Index best = -1;
    double best_w = thresh;
    for (Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    }
    if (best < 0) {
      result.converged = true;
      return result;
    }
    passive[static_cast<std::size_t>(best)] = true;

    // Inner loop: step toward the passive-set solution until it is feasible.
    for (;;) {
      ++result.iterations;
      const VectorXd s = solve_passive(gram, c, passive);
      bool feasible = true;
      for (Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && s(i) <= 0.0) feasible = false;
      }
      if (feasible) {
        x = s;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && s(i) <= 0.0) {
          alpha = std::min(alpha, x(i) / (x(i) - s(i)));
        }
      }
      x += alpha * (s - x);
      for (Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x(i) <= 0.0) {
          passive[static_cast<std::size_t>(i)] = false;
          x(i) = 0.0;
        }
      }
      if (result.iterations >= max_iterations) return result;
    }
  }
  return result;
}

}  // namespace kktleak

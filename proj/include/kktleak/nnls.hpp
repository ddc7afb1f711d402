#pragma once

#include <Eigen/Core>

namespace kktleak {

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  /// False when the iteration cap was hit before the optimality test passed.
  bool converged = false;
};

/**
 * Lawson-Hanson active-set solver for
 *
 *   min_{x >= 0} 0.5 x^T G x - c^T x
 *
 * which is nonnegative least squares min ||A x - t|| given G = A^T A and
 * c = A^T t. Terminates when every free gradient component c - G x is at most
 * tol * max(1, max|c|).
 */
NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c,
                     double tol = 1e-12, int max_iterations = 10000);

}  // namespace kktleak

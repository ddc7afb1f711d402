#include "kktleak/nnls.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <limits>
#include <random>

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Exhaustive oracle: least squares on every support pattern, keep the best
// nonnegative one.
VectorXd brute_force_nnls(const MatrixXd& a, const VectorXd& t) {
  const int n = static_cast<int>(a.cols());
  VectorXd best = VectorXd::Zero(n);
  double best_obj = t.squaredNorm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < n; ++j) {
      if (mask & (1 << j)) cols.push_back(j);
    }
    MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
    const VectorXd xs = sub.completeOrthogonalDecomposition().solve(t);
    if ((xs.array() < 0.0).any()) continue;
    VectorXd x = VectorXd::Zero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) x(cols[c]) = xs(static_cast<Eigen::Index>(c));
    const double obj = (a * x - t).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("unconstrained optimum inside the orthant is returned") {
  MatrixXd g(2, 2);
  g << 2, 0, 0, 4;
  VectorXd c(2);
  c << 2, 8;
  const auto r = kktleak::nnls_gram(g, c);
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(2.0));
}

TEST_CASE("negative directions are clamped to zero") {
  MatrixXd g = MatrixXd::Identity(3, 3);
  VectorXd c(3);
  c << 1, -2, 3;
  const auto r = kktleak::nnls_gram(g, c);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == 0.0);
  CHECK(r.x(2) == doctest::Approx(3.0));
}

TEST_CASE("zero right-hand side gives zero") {
  const auto r = kktleak::nnls_gram(MatrixXd::Identity(4, 4), VectorXd::Zero(4));
  CHECK(r.x.isZero());
  CHECK(r.converged);
}

TEST_CASE("property: agrees with exhaustive search on random problems") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 3 + trial % 6;
    const int n = 1 + trial % 7;
    MatrixXd a(m, n);
    VectorXd t(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
      t(i) = normal(rng);
    }
    const auto r = kktleak::nnls_gram(a.transpose() * a, a.transpose() * t);
    const VectorXd ref = brute_force_nnls(a, t);
    CHECK(r.converged);
    CHECK((r.x.array() >= 0.0).all());
    CHECK((a * r.x - t).squaredNorm() <= (a * ref - t).squaredNorm() + 1e-10);
    if (m >= n) CHECK((r.x - ref).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("rank-deficient Gram matrices still converge") {
  MatrixXd a(3, 3);
  a << 1, 2, 3, 2, 4, 6, 1, 0, 1;  // column 3 = column 1 + column 2
  VectorXd t(3);
  t << 1, 2, 0.5;
  const auto r = kktleak::nnls_gram(a.transpose() * a, a.transpose() * t);
  CHECK(r.converged);
  const VectorXd ref = brute_force_nnls(a, t);
  CHECK((a * r.x - t).squaredNorm() == doctest::Approx((a * ref - t).squaredNorm()).epsilon(1e-9));
}

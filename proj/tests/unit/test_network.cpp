#include "kktleak/error.hpp"
#include "kktleak/network.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace kktleak;

namespace {

NetworkParams random_net(Index d, Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd w(k, d);
  VectorXd b(k), v(k);
  for (Index j = 0; j < k; ++j) {
    for (Index c = 0; c < d; ++c) w(j, c) = normal(rng);
    b(j) = normal(rng);
    v(j) = normal(rng);
  }
  return NetworkParams(std::move(w), std::move(b), std::move(v));
}

}  // namespace

TEST_CASE("forward on hand-checked networks") {
  SUBCASE("zero output weights") {
    MatrixXd w(3, 2);
    w << 1, 2, -1, 0.5, 3, -3;
    const NetworkParams net(w, VectorXd::Ones(3), VectorXd::Zero(3));
    CHECK(forward(net, VectorXd::Constant(2, 1.7)) == 0.0);
  }
  SUBCASE("single neuron") {
    const NetworkParams net(MatrixXd::Ones(1, 1), VectorXd::Zero(1), VectorXd::Ones(1));
    CHECK(forward(net, VectorXd::Constant(1, 2.0)) == 2.0);
  }
  SUBCASE("two neurons") {
    VectorXd b(2), v(2);
    b << 0, -1;
    v << 1, -1;
    const NetworkParams net(MatrixXd::Ones(2, 1), b, v);
    CHECK(forward(net, VectorXd::Constant(1, 2.0)) == 1.0);
  }
}

TEST_CASE("forward rejects a wrong input dimension") {
  const NetworkParams net = NetworkParams::zeros(3, 2);
  CHECK_THROWS_AS(forward(net, VectorXd::Zero(2)), DimensionMismatch);
  CHECK_THROWS_AS(forward_batch(net, MatrixXd::Zero(4, 2)), DimensionMismatch);
}

TEST_CASE("constructor validates shape and finiteness") {
  CHECK_THROWS_AS(NetworkParams(MatrixXd::Zero(2, 1), VectorXd::Zero(3), VectorXd::Zero(2)),
                  InvalidInput);
  CHECK_THROWS_AS(NetworkParams(MatrixXd::Zero(2, 1), VectorXd::Zero(2), VectorXd::Zero(1)),
                  InvalidInput);
  VectorXd bad = VectorXd::Zero(2);
  bad(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(NetworkParams(MatrixXd::Zero(2, 1), bad, VectorXd::Zero(2)), InvalidInput);
  bad(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(NetworkParams(MatrixXd::Zero(2, 1), VectorXd::Zero(2), bad), InvalidInput);
  CHECK_THROWS_AS(NetworkParams(std::vector<Neuron>{}), InvalidInput);
}

TEST_CASE("datasets need +-1 labels and matching sizes") {
  CHECK_THROWS_AS(LabeledDataset(MatrixXd::Zero(2, 1), VectorXd::Zero(2)), InvalidInput);
  CHECK_THROWS_AS(LabeledDataset(MatrixXd::Zero(2, 1), VectorXd::Ones(3)), InvalidInput);
  CHECK_THROWS_AS(LabeledDataset(MatrixXd::Zero(0, 1), VectorXd::Ones(0)), InvalidInput);
  const LabeledDataset data(MatrixXd::Random(4, 3), VectorXd::Ones(4));
  const LabeledDataset sub = data.subset({2, 0});
  CHECK(sub.size() == 2);
  CHECK(sub.points().row(0) == data.points().row(2));
}

TEST_CASE("neurons round-trip through the list form") {
  std::mt19937_64 rng(3);
  const NetworkParams net = random_net(3, 5, rng);
  const NetworkParams back(net.neurons());
  CHECK(back.weights() == net.weights());
  CHECK(back.biases() == net.biases());
  CHECK(back.output_weights() == net.output_weights());
  const NetworkParams flat = NetworkParams::unflatten(net.flatten(), 3, 5);
  CHECK(flat.flatten() == net.flatten());
  CHECK(net.flatten()(1) == net.weights()(0, 1));
}

TEST_CASE("property: output scales by t^2 when every parameter scales by t") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkParams net = random_net(1 + trial % 4, 1 + trial % 7, rng);
    const VectorXd x = VectorXd::Random(net.input_dim()) * 3.0;
    const double t = scale(rng);
    const double base = forward(net, x);
    const double scaled = forward(net.scaled(t), x);
    CHECK(std::abs(scaled - t * t * base) <= 1e-9 * std::max(1e-300, std::abs(t * t * base)) + 1e-300);
  }
}

TEST_CASE("batch forward matches pointwise forward") {
  std::mt19937_64 rng(5);
  const NetworkParams net = random_net(4, 6, rng);
  const MatrixXd x = MatrixXd::Random(10, 4);
  const VectorXd out = forward_batch(net, x);
  for (Index i = 0; i < 10; ++i) CHECK(out(i) == doctest::Approx(forward(net, x.row(i).transpose())).epsilon(1e-14));
  const MatrixXd z = pre_activations(net, x);
  CHECK(z(3, 2) == doctest::Approx(net.weights().row(2).dot(x.row(3)) + net.biases()(2)));
}

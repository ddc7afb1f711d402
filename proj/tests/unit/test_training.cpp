#include "kktleak/distributions.hpp"
#include "kktleak/error.hpp"
#include "kktleak/training.hpp"

#include "kkt_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <future>
#include <random>

using namespace kktleak;

namespace {

LabeledDataset two_points() {
  MatrixXd x(2, 1);
  x << -1.0, 1.0;
  VectorXd y(2);
  y << -1.0, 1.0;
  return LabeledDataset(x, y);
}

// Loss evaluated straight from forward(), independent of the trainer.
double reference_loss(const NetworkParams& net, const LabeledDataset& data, LossKind kind) {
  double total = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const double z = data.labels()(i) * forward(net, data.points().row(i).transpose());
    total += kind == LossKind::exponential ? std::exp(-z) : std::log1p(std::exp(-z));
  }
  return total / static_cast<double>(data.size());
}

LabeledDataset mixture_data(Index d, Index n, std::uint64_t seed) {
  const Sample s = sample(DistributionSpec::two_gaussian_mixture(d, seed), n);
  return LabeledDataset(s.points, label_by_component(s.components));
}

}  // namespace

TEST_CASE("loss of the zero network") {
  const NetworkParams zero = NetworkParams::zeros(3, 4);
  const LabeledDataset data(MatrixXd::Random(5, 3), VectorXd::Ones(5));
  CHECK(loss(zero, data, LossKind::exponential) == doctest::Approx(1.0));
  CHECK(loss(zero, data, LossKind::logistic) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("loss of a point at margin one") {
  const NetworkParams net(MatrixXd::Ones(1, 1), VectorXd::Zero(1), VectorXd::Ones(1));
  const LabeledDataset data(MatrixXd::Ones(1, 1), VectorXd::Ones(1));
  CHECK(loss(net, data, LossKind::exponential) == doctest::Approx(std::exp(-1.0)));
  CHECK(log_loss(net, data, LossKind::exponential) == doctest::Approx(-1.0));
}

TEST_CASE("log loss stays finite where the loss underflows") {
  const NetworkParams net(MatrixXd::Ones(1, 1), VectorXd::Zero(1), VectorXd::Constant(1, 1e4));
  const LabeledDataset data(MatrixXd::Ones(1, 1), VectorXd::Ones(1));
  CHECK(loss(net, data, LossKind::exponential) == 0.0);
  CHECK(log_loss(net, data, LossKind::exponential) == doctest::Approx(-1e4));
  CHECK(log_loss(net, data, LossKind::logistic) == doctest::Approx(-1e4));
  CHECK(pointwise_loss(-800.0, LossKind::logistic) == doctest::Approx(800.0));
}

TEST_CASE("loss rejects mismatched dimensions") {
  const LabeledDataset data(MatrixXd::Zero(2, 2), VectorXd::Ones(2));
  CHECK_THROWS_AS(loss(NetworkParams::zeros(3, 1), data, LossKind::exponential),
                  DimensionMismatch);
  CHECK_THROWS_AS(gradient(NetworkParams::zeros(3, 1), data, LossKind::exponential),
                  DimensionMismatch);
}

TEST_CASE("gradient with every neuron inactive has zero hidden blocks") {
  MatrixXd w(2, 1);
  w << 1.0, -1.0;
  VectorXd b = VectorXd::Constant(2, -5.0);
  const NetworkParams net(w, b, VectorXd::Ones(2));
  const NetworkParams g = gradient(net, two_points(), LossKind::exponential);
  CHECK(g.weights().isZero());
  CHECK(g.biases().isZero());
  CHECK(g.output_weights().isZero());
}

TEST_CASE("gradient of one active neuron on one point") {
  const double w = 1.0, b = 0.5, v = 0.7, x = 2.0, y = 1.0;
  const NetworkParams net(MatrixXd::Constant(1, 1, w), VectorXd::Constant(1, b),
                          VectorXd::Constant(1, v));
  const LabeledDataset data(MatrixXd::Constant(1, 1, x), VectorXd::Constant(1, y));
  const double pre = w * x + b;
  const double dl = -std::exp(-y * v * pre);  // l'(z) for the exponential loss
  const NetworkParams g = gradient(net, data, LossKind::exponential);
  CHECK(g.weights()(0, 0) == doctest::Approx(dl * y * v * x));
  CHECK(g.biases()(0) == doctest::Approx(dl * y * v));
  CHECK(g.output_weights()(0) == doctest::Approx(dl * y * pre));

  const double dl_log = -1.0 / (1.0 + std::exp(y * v * pre));
  const NetworkParams gl = gradient(net, data, LossKind::logistic);
  CHECK(gl.output_weights()(0) == doctest::Approx(dl_log * y * pre));
}

TEST_CASE("sigma'(0) = 0 at an exact kink") {
  const NetworkParams net(MatrixXd::Ones(1, 1), VectorXd::Constant(1, -1.0), VectorXd::Ones(1));
  const LabeledDataset data(MatrixXd::Ones(1, 1), VectorXd::Ones(1));
  const NetworkParams g = gradient(net, data, LossKind::exponential);
  CHECK(g.weights()(0, 0) == 0.0);
  CHECK(g.biases()(0) == 0.0);
}

TEST_CASE("property: gradient matches central finite differences") {
  for (const LossKind kind : {LossKind::exponential, LossKind::logistic}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto inst = testing::kink_free_instance(3, 4, 5, 100 + seed);
      const VectorXd theta = inst.net.flatten();
      const VectorXd g = gradient(inst.net, inst.data, kind).flatten();
      const double h = 1e-5;
      for (Index p = 0; p < theta.size(); ++p) {
        VectorXd plus = theta, minus = theta;
        plus(p) += h;
        minus(p) -= h;
        const double fd =
            (reference_loss(NetworkParams::unflatten(plus, 3, 4), inst.data, kind) -
             reference_loss(NetworkParams::unflatten(minus, 3, 4), inst.data, kind)) /
            (2.0 * h);
        CHECK(std::abs(g(p) - fd) <= 1e-5 * std::max({std::abs(g(p)), std::abs(fd), 1e-5}));
      }
    }
  }
}

TEST_CASE("init_small is deterministic and small") {
  const NetworkParams a = init_small(2, 3, 1e-4, 7);
  const NetworkParams b = init_small(2, 3, 1e-4, 7);
  CHECK(a.flatten() == b.flatten());
  CHECK(init_small(2, 3, 1e-4, 8).flatten() != a.flatten());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CHECK(init_small(10, 50, 1e-4, seed).flatten().cwiseAbs().maxCoeff() < 1e-2);
  }
  CHECK_THROWS_AS(init_small(2, 3, 0.0, 1), InvalidInput);
  CHECK_THROWS_AS(init_small(0, 3, 1.0, 1), InvalidInput);
}

TEST_CASE("init_small scales input weights by 1/sqrt(d)") {
  const NetworkParams net = init_small(400, 400, 1.0, 3);
  const double w_var = net.weights().squaredNorm() / (400.0 * 400.0);
  const double v_var = net.output_weights().squaredNorm() / 400.0;
  CHECK(w_var == doctest::Approx(1.0 / 400.0).epsilon(0.02));
  CHECK(v_var == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_growth = 0.9;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = TrainConfig{};
  cfg.max_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = TrainConfig{};
  cfg.loss_target = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("training separates two symmetric points") {
  TrainConfig cfg;
  cfg.max_steps = 20000;
  cfg.rng_seed = 0;
  const LabeledDataset data = two_points();
  const TrainResult r = train(data, 8, cfg);
  const VectorXd out = forward_batch(r.net, data.points());
  CHECK(out(0) < 0.0);
  CHECK(out(1) > 0.0);
  CHECK(r.trace.records.back().min_margin > 0.0);
  CHECK(r.trace.reached_loss_below_inv_n);

  // Normalized margin keeps improving over the second half of the run.
  const auto& recs = r.trace.records;
  REQUIRE(recs.size() >= 4);
  for (std::size_t i = recs.size() / 2 + 1; i < recs.size(); ++i) {
    CHECK(recs[i].normalized_margin >= recs[i - 1].normalized_margin - 1e-3);
  }
}

TEST_CASE("two symmetric points: success rate over init seeds") {
  // Seeds where every neuron active at x = -1 starts with v > 0 lose that
  // point: the activations die before v changes sign. Frozen count.
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg;
    cfg.max_steps = 20000;
    cfg.rng_seed = seed;
    const VectorXd out = forward_batch(train(two_points(), 8, cfg).net, two_points().points());
    ok += out(0) < 0.0 && out(1) > 0.0;
  }
  CHECK(ok == 17);
}

TEST_CASE("a single point ends on the margin") {
  const LabeledDataset data(MatrixXd::Constant(1, 1, 0.7), VectorXd::Constant(1, -1.0));
  TrainConfig cfg;
  cfg.max_steps = 2000;
  const TrainResult r = train(data, 1, cfg);
  const double phi = forward_batch(r.net, data.points())(0);
  CHECK(phi < 0.0);
  CHECK(std::abs(phi) == r.trace.records.back().min_margin);
}

TEST_CASE("trace records are ordered and finite") {
  TrainConfig cfg;
  cfg.max_steps = 1000;
  cfg.checkpoint_every = 64;
  const TrainResult r = train(mixture_data(5, 10, 2), 20, cfg);
  REQUIRE(!r.trace.records.empty());
  CHECK(r.trace.records.front().step == 0);
  for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
    CHECK(r.trace.records[i].step > r.trace.records[i - 1].step);
  }
  for (const TraceRecord& rec : r.trace.records) CHECK(std::isfinite(rec.loss));
  const std::string csv = trace_to_csv(r.trace);
  CHECK(csv.rfind("step,loss,min_margin,param_norm,normalized_margin,kkt_residual\n", 0) == 0);
}

TEST_CASE("property: small fixed steps never raise the loss") {
  TrainConfig cfg;
  cfg.lr_growth = 1.0;
  cfg.learning_rate = 1e-3;
  cfg.backtracking = false;
  cfg.max_steps = 3000;
  cfg.checkpoint_every = 50;
  cfg.init_scale = 0.1;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.rng_seed = seed;
    const TrainResult r = train(mixture_data(20, 20, seed), 100, cfg);
    for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
      CHECK(r.trace.records[i].loss <= r.trace.records[i - 1].loss + 1e-12);
    }
  }
}

TEST_CASE("property: identical inputs give bitwise-identical traces") {
  TrainConfig cfg;
  cfg.max_steps = 1500;
  cfg.checkpoint_every = 50;
  cfg.rng_seed = 9;
  const LabeledDataset data = mixture_data(8, 12, 4);
  const TrainResult a = train(data, 30, cfg);
  const TrainResult b = train(data, 30, cfg);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    CHECK(a.trace.records[i].loss == b.trace.records[i].loss);
  }
  CHECK(a.net.flatten() == b.net.flatten());
}

TEST_CASE("concurrent training runs match sequential ones") {
  TrainConfig cfg;
  cfg.max_steps = 500;
  const LabeledDataset data = mixture_data(6, 10, 5);
  const TrainResult seq = train(data, 16, cfg);
  auto job = [&] { return train(data, 16, cfg); };
  auto f1 = std::async(std::launch::async, job);
  auto f2 = std::async(std::launch::async, job);
  CHECK(f1.get().net.flatten() == seq.net.flatten());
  CHECK(f2.get().net.flatten() == seq.net.flatten());
}

TEST_CASE("a non-finite loss without backtracking raises TrainingDiverged") {
  TrainConfig cfg;
  cfg.backtracking = false;
  cfg.learning_rate = 1e300;
  cfg.lr_growth = 10.0;
  cfg.max_steps = 100;
  cfg.init_scale = 1.0;
  try {
    train(mixture_data(4, 8, 1), 10, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(!e.trace().records.empty());
    CHECK(e.trace().steps_taken >= 1);
  }
}

TEST_CASE("backtracking survives an absurd learning rate") {
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.max_steps = 300;
  cfg.init_scale = 1.0;
  const TrainResult r = train(mixture_data(4, 8, 1), 10, cfg);
  CHECK(r.trace.rejected_steps > 0);
  CHECK(std::isfinite(r.trace.records.back().loss));
}

TEST_CASE("dead initial networks are redrawn") {
  // Every point sits at x = 0 with zero biases, so a k=1 network whose bias
  // is drawn nonpositive cannot move; some redraw must give b > 0.
  const LabeledDataset data(MatrixXd::Zero(1, 1), VectorXd::Ones(1));
  TrainConfig cfg;
  cfg.max_steps = 10;
  int redraws = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.rng_seed = seed;
    const TrainResult r = train(data, 1, cfg);
    redraws += r.trace.init_attempts > 1;
    CHECK(r.net.biases()(0) > 0.0);
  }
  CHECK(redraws > 0);
}

#include "kktleak/error.hpp"
#include "kktleak/membership.hpp"

#include "kkt_oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace kktleak;

namespace {

// Phi(x) = x_0 for inputs in R^d.
NetworkParams coordinate_net(Index d) {
  MatrixXd w = MatrixXd::Zero(2, d);
  w(0, 0) = 1.0;
  w(1, 0) = -1.0;
  VectorXd v(2);
  v << 1.0, -1.0;
  return NetworkParams(w, VectorXd::Zero(2), v);
}

VectorXd at(double x0, Index d = 3) {
  VectorXd x = VectorXd::Zero(d);
  x(0) = x0;
  return x;
}

}  // namespace

TEST_CASE("membership score basics") {
  CHECK(membership_score(NetworkParams::zeros(3, 5), VectorXd::Ones(3)) == 0.0);
  CHECK(membership_score(coordinate_net(3), at(-2.5)) == 2.5);
  // Orthogonal to every w_j with zero biases.
  VectorXd x = VectorXd::Zero(3);
  x(1) = 4.0;
  CHECK(membership_score(coordinate_net(3), x) == 0.0);
  CHECK_THROWS_AS(membership_score(coordinate_net(3), VectorXd::Ones(2)), DimensionMismatch);
}

TEST_CASE("support points of a constructed KKT network score exactly m") {
  const auto inst = testing::private_neuron_kkt(4, 8, 2.5, 12);
  for (Index i = 0; i < 4; ++i) {
    CHECK(membership_score(inst.net, inst.data.points().row(i).transpose()) ==
          doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("known-margin rule") {
  const NetworkParams net = coordinate_net(3);
  const double m = 2.0;
  CHECK(attack_known_margin(net, m, at(2.0)).is_member);
  CHECK_FALSE(attack_known_margin(net, m, at(0.2)).is_member);
  const MembershipVerdict tie = attack_known_margin(net, m, at(-1.0));
  CHECK(tie.is_member);
  CHECK(tie.threshold_used == 1.0);
  CHECK_FALSE(tie.strict);
  CHECK(tie.rule == MembershipRule::known_margin);
  CHECK_THROWS_AS(attack_known_margin(net, 0.0, at(1.0)), InvalidInput);
}

TEST_CASE("leaked-points rule") {
  const auto inst = testing::private_neuron_kkt(3, 5, 1.5, 2);
  const auto one = attack_leaked_points(inst.net, inst.data.points().topRows(1));
  REQUIRE(one.size() == 1);
  CHECK(one[0].is_member);
  CHECK(one[0].threshold_used == doctest::Approx(0.75));

  const NetworkParams net = coordinate_net(3);
  MatrixXd zs(2, 3);
  zs.row(0) = at(2.0).transpose();
  zs.row(1) = at(0.1).transpose();
  const auto two = attack_leaked_points(net, zs);
  CHECK(two[0].is_member);
  CHECK_FALSE(two[1].is_member);

  MatrixXd same(3, 3);
  for (Index i = 0; i < 3; ++i) same.row(i) = at(i % 2 == 0 ? 1.3 : -1.3).transpose();
  for (const auto& v : attack_leaked_points(net, same)) CHECK(v.is_member);

  CHECK_THROWS_AS(attack_leaked_points(net, MatrixXd::Zero(2, 3)), DegenerateNetwork);
  CHECK_THROWS_AS(attack_leaked_points(net, MatrixXd::Zero(0, 3)), InvalidInput);
}

TEST_CASE("bounded-margin rule is strict") {
  const NetworkParams net = coordinate_net(3);
  const double c = 1.0 / std::exp(1.0);
  CHECK(attack_bounded_margin(net, c, at(2.0 * c)).is_member);
  CHECK_FALSE(attack_bounded_margin(net, c, at(0.01)).is_member);
  const MembershipVerdict edge = attack_bounded_margin(net, 0.5, at(0.5));
  CHECK_FALSE(edge.is_member);
  CHECK(edge.strict);
  CHECK_THROWS_AS(attack_bounded_margin(net, 0.0, at(1.0)), InvalidInput);
  CHECK(RuleParams{}.bound_c == doctest::Approx(c));
}

TEST_CASE("evaluation counts and AUC") {
  RuleParams p;
  p.margin = 1.0;
  VectorXd members = VectorXd::Constant(4, 1.0);
  VectorXd fresh = VectorXd::Zero(6);
  AttackEvaluation ev = evaluate_scores(members, fresh, p);
  CHECK(ev.accuracy == 1.0);
  CHECK(ev.auc == 1.0);
  CHECK(ev.true_positives == 4);
  CHECK(ev.true_negatives == 6);
  CHECK(ev.true_positive_rate == 1.0);
  CHECK(ev.false_positive_rate == 0.0);

  ev = evaluate_scores(VectorXd::Constant(3, 0.7), VectorXd::Constant(5, 0.7), p);
  CHECK(ev.auc == 0.5);
  CHECK(ev.true_positives + ev.false_positives + ev.true_negatives + ev.false_negatives == 8);
}

TEST_CASE("AUC against a pairwise-count oracle") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> coarse(0, 5);  // many ties
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd pos(7 + trial % 5), neg(4 + trial % 9);
    for (Index i = 0; i < pos.size(); ++i) pos(i) = coarse(rng);
    for (Index i = 0; i < neg.size(); ++i) neg(i) = coarse(rng);
    double wins = 0.0;
    for (Index i = 0; i < pos.size(); ++i) {
      for (Index j = 0; j < neg.size(); ++j) {
        wins += pos(i) > neg(j) ? 1.0 : (pos(i) == neg(j) ? 0.5 : 0.0);
      }
    }
    CHECK(auc(pos, neg) == doctest::Approx(wins / static_cast<double>(pos.size() * neg.size())));
  }
}

TEST_CASE("evaluate_attack on a network and CSV export") {
  const NetworkParams net = coordinate_net(2);
  MatrixXd members(2, 2), fresh(1, 2);
  members << 1.0, 0.0, -1.0, 5.0;
  fresh << 0.1, 1.0;
  RuleParams p;
  p.margin = 1.0;
  const AttackEvaluation ev = evaluate_attack(net, members, fresh, p);
  CHECK(ev.points.size() == 3);
  CHECK(ev.points[2].truth == false);
  CHECK(evaluation_to_csv(ev) ==
        "point_id,score,truth,verdict,rule\n0,1,1,1,known-margin\n1,1,1,1,known-margin\n"
        "2,0.1,0,0,known-margin\n");
  CHECK_THROWS_AS(evaluate_attack(net, MatrixXd::Zero(1, 3), fresh, p), DimensionMismatch);
}

TEST_CASE("rule names parse both ways") {
  for (const auto rule : {MembershipRule::known_margin, MembershipRule::leaked_points,
                          MembershipRule::bounded_margin}) {
    CHECK(parse_membership_rule(to_string(rule)) == rule);
  }
  CHECK_THROWS_AS(parse_membership_rule("loss-threshold"), InvalidInput);
}

TEST_CASE("property: scores ignore neuron order; known-margin ignores joint rescaling") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = testing::kink_free_instance(4, 6, 10, 500 + trial);
    std::vector<Neuron> ns = inst.net.neurons();
    std::shuffle(ns.begin(), ns.end(), rng);
    const NetworkParams perm(ns);
    const double m = 0.2 + std::abs(normal(rng));
    const double t = 0.1 + 3.0 * std::abs(normal(rng));
    for (Index i = 0; i < 10; ++i) {
      const VectorXd x = inst.data.points().row(i).transpose();
      CHECK(membership_score(perm, x) == doctest::Approx(membership_score(inst.net, x)).epsilon(1e-12));
      const bool base = attack_known_margin(inst.net, m, x).is_member;
      CHECK(attack_known_margin(inst.net.scaled(t), t * t * m, x).is_member == base);
    }
  }
}

TEST_CASE("property: leaked-points verdicts follow their points under permutation") {
  std::mt19937_64 rng(5);
  const auto inst = testing::kink_free_instance(3, 5, 12, 9);
  const auto base = attack_leaked_points(inst.net, inst.data.points());
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Index> order(12);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    MatrixXd zs(12, 3);
    for (Index i = 0; i < 12; ++i) zs.row(i) = inst.data.points().row(order[i]);
    const auto perm = attack_leaked_points(inst.net, zs);
    for (Index i = 0; i < 12; ++i) CHECK(perm[i].is_member == base[order[i]].is_member);
  }
}

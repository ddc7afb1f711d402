#include "kktleak/membership.hpp"

#include "kktleak/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace kktleak {
namespace {

MembershipVerdict verdict(double score, MembershipRule rule, double threshold, bool strict) {
  MembershipVerdict v;
  v.score = score;
  v.rule = rule;
  v.threshold_used = threshold;
  v.strict = strict;
  v.is_member = strict ? score > threshold : score >= threshold;
  return v;
}

VectorXd scores_of(const NetworkParams& net, const MatrixXd& points) {
  if (points.cols() != net.input_dim()) {
    throw DimensionMismatch("points have dimension " + std::to_string(points.cols()) +
                            ", network expects " + std::to_string(net.input_dim()));
  }
  return forward_batch(net, points).cwiseAbs();
}

}  // namespace

std::string to_string(MembershipRule rule) {
  switch (rule) {
    case MembershipRule::known_margin: return "known-margin";
    case MembershipRule::leaked_points: return "leaked-points";
    case MembershipRule::bounded_margin: return "bounded-margin";
  }
  return "unknown";
}

MembershipRule parse_membership_rule(const std::string& name) {
  if (name == "known-margin") return MembershipRule::known_margin;
  if (name == "leaked-points") return MembershipRule::leaked_points;
  if (name == "bounded-margin") return MembershipRule::bounded_margin;
  throw InvalidInput("unknown membership rule '" + name + "'");
}

double membership_score(const NetworkParams& net, const Eigen::Ref<const VectorXd>& x) {
  return std::abs(forward(net, x));
}

MembershipVerdict attack_known_margin(const NetworkParams& net, double m,
                                      const Eigen::Ref<const VectorXd>& x) {
  if (!(m > 0.0)) throw InvalidInput("margin must be positive");
  return verdict(membership_score(net, x), MembershipRule::known_margin, m / 2.0, false);
}

std::vector<MembershipVerdict> attack_leaked_points(const NetworkParams& net,
                                                    const MatrixXd& zs) {
  if (zs.rows() < 1) throw InvalidInput("leaked-points attack needs at least one point");
  RuleParams p;
  p.rule = MembershipRule::leaked_points;
  return decide(scores_of(net, zs), p);
}

MembershipVerdict attack_bounded_margin(const NetworkParams& net, double c,
                                        const Eigen::Ref<const VectorXd>& x) {
  if (!(c > 0.0)) throw InvalidInput("bound C must be positive");
  return verdict(membership_score(net, x), MembershipRule::bounded_margin, c, true);
}

std::vector<MembershipVerdict> decide(const VectorXd& scores, const RuleParams& params) {
  double threshold = 0.0;
  bool strict = false;
  switch (params.rule) {
    case MembershipRule::known_margin:
      if (!(params.margin > 0.0)) throw InvalidInput("margin must be positive");
      threshold = params.margin / 2.0;
      break;
    case MembershipRule::leaked_points: {
      if (scores.size() == 0) throw InvalidInput("no scores given");
      const double alpha = scores.maxCoeff();
      if (!(alpha > 0.0)) {
        throw DegenerateNetwork("every score is zero, so no point can be a member");
      }
      threshold = alpha / 2.0;
      break;
    }
    case MembershipRule::bounded_margin:
      if (!(params.bound_c > 0.0)) throw InvalidInput("bound C must be positive");
      threshold = params.bound_c;
      strict = true;
      break;
  }
  std::vector<MembershipVerdict> out;
  out.reserve(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i) {
    if (!(scores(i) >= 0.0)) throw InvalidInput("scores must be nonnegative");
    out.push_back(verdict(scores(i), params.rule, threshold, strict));
  }
  return out;
}

double auc(const VectorXd& pos, const VectorXd& neg) {
  const Index np = pos.size();
  const Index nn = neg.size();
  if (np == 0 || nn == 0) throw InvalidInput("AUC needs both classes");
  std::vector<std::pair<double, bool>> all;
  for (Index i = 0; i < np; ++i) all.emplace_back(pos(i), true);
  for (Index i = 0; i < nn; ++i) all.emplace_back(neg(i), false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second) rank_sum += avg;
    }
    i = j;
  }
  const double p = static_cast<double>(np);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(nn));
}

AttackEvaluation evaluate_scores(const VectorXd& member_scores, const VectorXd& fresh_scores,
                                 const RuleParams& params) {
  if (member_scores.size() == 0 || fresh_scores.size() == 0) {
    throw InvalidInput("evaluation needs members and fresh points");
  }
  VectorXd all(member_scores.size() + fresh_scores.size());
  all << member_scores, fresh_scores;
  const std::vector<MembershipVerdict> v = decide(all, params);

  AttackEvaluation ev;
  ev.rule = params.rule;
  for (Index i = 0; i < all.size(); ++i) {
    const bool truth = i < member_scores.size();
    const bool said = v[static_cast<std::size_t>(i)].is_member;
    ev.points.push_back({i, all(i), truth, v[static_cast<std::size_t>(i)]});
    if (truth && said) ++ev.true_positives;
    if (truth && !said) ++ev.false_negatives;
    if (!truth && said) ++ev.false_positives;
    if (!truth && !said) ++ev.true_negatives;
  }
  const double total = static_cast<double>(all.size());
  ev.accuracy = static_cast<double>(ev.true_positives + ev.true_negatives) / total;
  ev.true_positive_rate =
      static_cast<double>(ev.true_positives) / static_cast<double>(member_scores.size());
  ev.false_positive_rate =
      static_cast<double>(ev.false_positives) / static_cast<double>(fresh_scores.size());
  ev.auc = auc(member_scores, fresh_scores);
  return ev;
}

AttackEvaluation evaluate_attack(const NetworkParams& net, const MatrixXd& members,
                                 const MatrixXd& fresh, const RuleParams& params) {
  return evaluate_scores(scores_of(net, members), scores_of(net, fresh), params);
}

std::string evaluation_to_csv(const AttackEvaluation& eval) {
  std::ostringstream out;
  out << "point_id,score,truth,verdict,rule\n";
  for (const PointOutcome& p : eval.points) {
    out << fmt::format("{},{},{},{},{}\n", p.point_id, p.score, p.truth ? 1 : 0,
                       p.verdict.is_member ? 1 : 0, to_string(p.verdict.rule));
  }
  return out.str();
}

}  // namespace kktleak

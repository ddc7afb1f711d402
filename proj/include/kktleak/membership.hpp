#pragma once

#include "kktleak/network.hpp"

#include <string>
#include <vector>

namespace kktleak {

enum class MembershipRule { known_margin, leaked_points, bounded_margin };

std::string to_string(MembershipRule rule);
/// "known-margin", "leaked-points" or "bounded-margin"; throws InvalidInput.
MembershipRule parse_membership_rule(const std::string& name);

struct MembershipVerdict {
  double score = 0.0;
  bool is_member = false;
  MembershipRule rule = MembershipRule::known_margin;
  double threshold_used = 0.0;
  /// Member iff score > threshold when true, score >= threshold otherwise.
  bool strict = false;
};

/// |Phi(theta; x)|, using only network evaluations.
double membership_score(const NetworkParams& net, const Eigen::Ref<const VectorXd>& x);

/// Member iff score >= m / 2.
MembershipVerdict attack_known_margin(const NetworkParams& net, double m,
                                      const Eigen::Ref<const VectorXd>& x);

/// alpha = max score over the rows of zs; member iff score >= alpha / 2.
/// Throws DegenerateNetwork when every score is zero.
std::vector<MembershipVerdict> attack_leaked_points(const NetworkParams& net,
                                                    const MatrixXd& zs);

/// Member iff score > c.
MembershipVerdict attack_bounded_margin(const NetworkParams& net, double c,
                                        const Eigen::Ref<const VectorXd>& x);

struct RuleParams {
  MembershipRule rule = MembershipRule::known_margin;
  /// Known margin m (known-margin rule).
  double margin = 0.0;
  /// Constant C (bounded-margin rule).
  double bound_c = 0.36787944117144233;
};

/// Verdicts for precomputed scores. The leaked-points rule takes alpha over
/// all given scores.
std::vector<MembershipVerdict> decide(const VectorXd& scores, const RuleParams& params);

struct PointOutcome {
  Index point_id = 0;
  double score = 0.0;
  bool truth = false;
  MembershipVerdict verdict;
};

struct AttackEvaluation {
  Index true_positives = 0;
  Index false_positives = 0;
  Index true_negatives = 0;
  Index false_negatives = 0;
  double accuracy = 0.0;
  double true_positive_rate = 0.0;
  double false_positive_rate = 0.0;
  /// Probability a random member outscores a random non-member, ties 1/2.
  double auc = 0.0;
  MembershipRule rule = MembershipRule::known_margin;
  /// Members first (ids 0..), then fresh points.
  std::vector<PointOutcome> points;
};

/// Applies the rule to every row of `members` and `fresh`.
AttackEvaluation evaluate_attack(const NetworkParams& net, const MatrixXd& members,
                                 const MatrixXd& fresh, const RuleParams& params);

/// Same on precomputed scores.
AttackEvaluation evaluate_scores(const VectorXd& member_scores, const VectorXd& fresh_scores,
                                 const RuleParams& params);

/// Area under the ROC curve via average ranks.
double auc(const VectorXd& positive_scores, const VectorXd& negative_scores);

/// CSV with header point_id,score,truth,verdict,rule; truth and verdict are 1
/// for member, 0 otherwise.
std::string evaluation_to_csv(const AttackEvaluation& eval);

}  // namespace kktleak

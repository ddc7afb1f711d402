#pragma once

#include "kktleak/network.hpp"
#include "kktleak/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kktleak {

inline constexpr int kKktReportFormatVersion = 1;

struct MarginInfo {
  double m = 0.0;
  /// Points with |Phi(x_i)| <= m (1 + 1e-9).
  std::vector<Index> argmin;
};

/// m = min_i |Phi(x_i)|. Throws DegenerateNetwork when every output is zero.
MarginInfo margin(const NetworkParams& net, const LabeledDataset& data);

/**
 * Quantities from the near-orthogonal regime: how large the per-point sums
 * sum_{j in J+-} v_j^2 lambda_l sigma'_{l,j} can be, where J+ = {v_j > 0} and
 * J- = {v_j < 0}.
 */
struct DiagnosticBounds {
  /// max_{i != j} |x_i . x_j|; 0 with delta_defined = false when n < 2.
  double delta = 0.0;
  bool delta_defined = true;
  double Delta_min = 0.0;  // min ||x_i||^2
  double Delta_max = 0.0;  // max ||x_i||^2

  /// m / (Delta_min + 1 - 2 (delta + 1)(n - 1)); infinite when the
  /// denominator is not positive (upper_bound_applicable = false).
  double upper_bound_sum = 0.0;
  bool upper_bound_applicable = false;
  /// (m - (delta + 1)(n - 1) upper_bound_sum) / (Delta_max + 1).
  double lower_bound_sum = 0.0;

  VectorXd sum_plus;   // per point, over J+
  VectorXd sum_minus;  // per point, over J-
  /// Per point: both sums <= upper_bound_sum.
  std::vector<bool> upper_ok;
  /// Per point: the sum for the label's sign is >= lower_bound_sum. Only
  /// support points are checked; others are reported true.
  std::vector<bool> lower_ok;
  bool all_upper_ok = true;
  bool all_lower_ok = true;

  double loss = 0.0;
  /// loss < 1/(2e).
  bool loss_below_threshold = false;
  /// m > 1/e whenever loss_below_threshold.
  bool margin_lower_ok = true;
};

struct KktReport {
  double margin_m = 0.0;
  double support_slack = 0.1;
  std::vector<Index> support_indices;
  /// One entry per training point, zero off the support. Empty when the
  /// support is empty.
  VectorXd lambdas;
  /// ||theta - sum_i lambda_i y_i grad Phi(x_i)|| / ||theta||.
  double stationarity_residual = 1.0;
  /// sigma'(i, j) = 1 iff w_j . x_i + b_j > 0.
  MatrixXd sigma_primes;
  int nnls_iterations = 0;
  bool nnls_converged = true;
  std::optional<DiagnosticBounds> diagnostics;
};

/**
 * Support = {i : |y_i Phi(x_i) - m| <= support_slack * m}. Fits nonnegative
 * lambda on the support so that sum_i lambda_i y_i grad Phi(x_i) is as close
 * as possible to theta.
 */
KktReport estimate_lambdas(const NetworkParams& net, const LabeledDataset& data,
                           double support_slack = 0.1);

DiagnosticBounds diagnostic_bounds(const KktReport& report, const NetworkParams& net,
                                   const LabeledDataset& data, LossKind kind);

/// estimate_lambdas followed by diagnostic_bounds stored in the report.
KktReport analyze_kkt(const NetworkParams& net, const LabeledDataset& data,
                      double support_slack, LossKind kind);

/// theta - sum_i coeffs_i grad Phi(x_i), the stationarity residual vector.
NetworkParams stationarity_residual_vector(const NetworkParams& net,
                                           const LabeledDataset& data,
                                           const VectorXd& coeffs);

/// Versioned JSON document with the same conventions as the model format.
std::string kkt_report_to_json(const KktReport& report);

}  // namespace kktleak

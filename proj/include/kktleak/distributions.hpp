#pragma once

#include "kktleak/network.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kktleak {

enum class DistributionKind { uniform_sphere, gaussian, gaussian_mixture };

std::string to_string(DistributionKind kind);
/// "uniform-sphere", "gaussian" or "gaussian-mixture"; throws InvalidInput.
DistributionKind parse_distribution_kind(const std::string& name);

struct DistributionSpec {
  DistributionKind kind = DistributionKind::gaussian_mixture;
  Index d = 1;
  /// Empty for the sphere; at most one mean for the Gaussian (zero if
  /// empty); one per component for the mixture.
  std::vector<VectorXd> means;
  std::vector<double> mixture_weights;
  std::uint64_t rng_seed = 0;

  /// Throws InvalidInput on inconsistent fields.
  void validate() const;

  /// Equal-weight mixture of N((1,0,...,0), I) and N((-1,0,...,0), I).
  static DistributionSpec two_gaussian_mixture(Index d, std::uint64_t seed);
};

struct Sample {
  MatrixXd points;  // n x d
  /// Mixture component per row; all zero for the other kinds.
  std::vector<int> components;
};

/// n i.i.d. draws, deterministic in spec.rng_seed. Sphere draws are
/// normalized Gaussians scaled to norm sqrt(d).
Sample sample(const DistributionSpec& spec, Index n);

/// Component 0 -> +1, component 1 -> -1. Throws InvalidInput when
/// num_components > 2 or an assignment is outside {0, 1}.
VectorXd label_by_component(const std::vector<int>& assignments, int num_components = 2);

struct AssumptionReport {
  Index n = 0;  // n_effective
  double delta = 0.0;  // max_{i != j} |x_i . x_j|
  double Delta = 0.0;  // min ||x_i||^2
  double ratio = 0.0;  // n delta / Delta
  double pairwise_threshold = 0.0;  // d^0.75
  double norm_threshold = 0.0;      // d / 2
  /// Fraction of pairs with |x_i . x_j| > pairwise_threshold.
  double empirical_tau_pairwise = 0.0;
  /// Fraction of points with ||x||^2 < norm_threshold.
  double empirical_tau_norm = 0.0;
};

/// Throws InvalidInput for fewer than 2 points or n_effective < 1.
AssumptionReport check_assumption(const MatrixXd& points, Index n_effective);

std::string assumption_report_to_json(const AssumptionReport& report);

/**
 * Dataset CSV: a header line "d=<d>,n=<n>", then one line per point with the
 * coordinates followed by the label.
 */
std::string dataset_to_csv(const LabeledDataset& data);
LabeledDataset dataset_from_csv(const std::string& text);

/// Points in the dataset layout; the label column is optional and ignored.
MatrixXd points_from_csv(const std::string& text);

void write_dataset(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset read_dataset(const std::filesystem::path& path);

}  // namespace kktleak

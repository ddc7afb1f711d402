#pragma once

#include "kktleak/config.hpp"
#include "kktleak/reconstruct.hpp"
#include "kktleak/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kktleak {

enum class LabelRule { random, sign };

struct ExperimentConfig {
  /// "margin" or "reconstruct".
  std::string experiment = "margin";

  // Margin experiment: two-Gaussian mixture with means (+-mean_shift, 0, ...).
  std::vector<Index> dims = {5, 20, 100, 500};
  Index width = 1000;
  Index n_train = 20;
  Index n_test = 1000;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double margin_slack = 0.1;
  double mean_shift = 1.0;

  TrainConfig train;
  /// Divide train.learning_rate by d.
  bool lr_over_d = true;

  // Reconstruction: n_train points uniform on [data_low, data_high].
  double data_low = -2.0;
  double data_high = 2.0;
  LabelRule labels = LabelRule::random;
  /// Append a neuron that starts active on the whole data range.
  bool global_neuron = false;
  double match_tolerance = 1e-3;
  ToleranceConfig tolerances;

  std::filesystem::path output_dir = "out";

  /// Throws InvalidInput.
  void validate() const;
};

/// Acceptance-scale defaults for each experiment kind.
ExperimentConfig default_margin_config();
ExperimentConfig default_reconstruct_config();

/// Reads the keys documented in README.md over the defaults chosen by the
/// `experiment` key. Unknown keys raise ParseError.
ExperimentConfig experiment_config_from(const FlatConfig& flat);

struct MarginRecord {
  Index d = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  double frac_train_on_margin = 0.0;
  double frac_test_on_or_above_margin = 0.0;
  double frac_test_below_margin = 0.0;
  double final_loss = 0.0;
  double margin = 0.0;
  double kkt_residual = 0.0;
  /// Known-margin attack on the training set against the test set.
  double attack_auc = 0.0;
  double attack_accuracy = 0.0;
  std::int64_t steps = 0;
  bool converged = false;
  bool reached_loss_below_inv_n = false;
  bool margin_lower_ok = true;
  double wall_seconds = 0.0;
};

struct MarginAggregate {
  Index d = 0;
  std::size_t cells = 0;  // non-diverged cells averaged
  double mean_train_on_margin = 0.0, std_train_on_margin = 0.0;
  double mean_test_on_or_above = 0.0, std_test_on_or_above = 0.0;
  double mean_test_below = 0.0, std_test_below = 0.0;
  double mean_auc = 0.0, mean_accuracy = 0.0;
};

struct MarginExperimentResult {
  std::vector<MarginRecord> records;  // sorted by d, then seed
  std::vector<MarginAggregate> aggregates;
};

/// One (d, seed) cell of the margin experiment.
MarginRecord run_margin_cell(const ExperimentConfig& cfg, Index d, std::uint64_t seed);

MarginExperimentResult run_margin_experiment(const ExperimentConfig& cfg);

/// Writes results.csv, plot_*.csv and timing.csv under cfg.output_dir.
void write_margin_outputs(const ExperimentConfig& cfg, const MarginExperimentResult& result);

struct ReconstructionRecord {
  std::uint64_t seed = 0;
  bool diverged = false;
  double final_loss = 0.0;
  double margin = 0.0;
  double kkt_residual = 1.0;
  std::size_t num_breakpoints = 0;
  CandidateSet candidates;
  std::size_t num_matched = 0;
  double matched_fraction = 0.0;
  bool success = false;  // matched_fraction >= candidates.guaranteed_fraction
  LemmaAudit audit;
  /// Single-point runs only: |recovered - true|, NaN otherwise.
  double single_point_error = 0.0;
  bool single_point = false;
  std::vector<double> train_points;
  double wall_seconds = 0.0;
};

/// Draws the 1D training set for one seed.
LabeledDataset reconstruction_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// Trains on reconstruction_data() and attacks with m from the training set.
/// With one point and width 1 the single-neuron recovery path is used.
ReconstructionRecord run_reconstruction_once(const ExperimentConfig& cfg, std::uint64_t seed);

std::vector<ReconstructionRecord> run_reconstruction_pipeline(const ExperimentConfig& cfg);

/// Writes results.csv, candidates_seed<s>.csv and timing.csv.
void write_reconstruction_outputs(const ExperimentConfig& cfg,
                                  const std::vector<ReconstructionRecord>& records);

/// Deterministic per-stream seed from (seed, d, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t d, std::uint64_t stream);

}  // namespace kktleak

#pragma once

#include "kktleak/error.hpp"
#include "kktleak/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kktleak {

enum class LossKind { exponential, logistic };

std::string to_string(LossKind kind);
/// Accepts "exponential"/"exp" and "logistic"/"log"; throws InvalidInput.
LossKind parse_loss_kind(const std::string& name);

/// l(z) for a single margin value z = y * Phi(x).
double pointwise_loss(double z, LossKind kind);

/// L(theta) = (1/n) sum_i l(y_i Phi(theta; x_i)).
double loss(const NetworkParams& net, const LabeledDataset& data, LossKind kind);

/// log L(theta), finite even where L itself underflows to 0.
double log_loss(const NetworkParams& net, const LabeledDataset& data, LossKind kind);

/// Gradient of L(theta) with sigma'(0) = 0, in the same shape as theta.
NetworkParams gradient(const NetworkParams& net, const LabeledDataset& data,
                       LossKind kind);

/**
 * Small Gaussian initialization: w ~ N(0, (scale / sqrt(d))^2 I),
 * b, v ~ N(0, scale^2). Deterministic in `seed`.
 */
NetworkParams init_small(Index d, Index k, double scale, std::uint64_t seed);

struct TrainConfig {
  LossKind loss_kind = LossKind::exponential;
  double init_scale = 1e-4;
  double learning_rate = 1e-2;
  /// Learning-rate multiplier applied after every accepted step.
  double lr_growth = 1.02;
  /// Growth stops once the loss falls below this value (0 disables the cap).
  double growth_cap_loss = 1e-8;
  std::int64_t max_steps = 10000;
  double loss_target = 1e-6;
  double kkt_residual_target = 1e-2;
  std::uint64_t rng_seed = 0;

  /// Trace record and stopping check every this many steps.
  std::int64_t checkpoint_every = 100;
  /// Support slack used for the residual in the trace.
  double support_slack = 0.1;

  /// When on, a step that raises log L by more than reject_tolerance (or
  /// makes it non-finite) is undone and the learning rate halved, but not
  /// below min_learning_rate. A smaller increase is kept without growing the
  /// rate. When off, a non-finite loss raises TrainingDiverged.
  bool backtracking = true;
  double reject_tolerance = 0.0;
  double min_learning_rate = 0.0;
  /// Caps ||step|| at this multiple of ||theta|| (0 disables).
  double max_relative_step = 0.0;
  /// Fresh draws tried when the gradient vanishes identically at init.
  int max_init_attempts = 20;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

struct TraceRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  /// min_i y_i Phi(x_i); negative while some point is misclassified.
  double min_margin = 0.0;
  double param_norm = 0.0;
  /// min_margin / ||theta||^2.
  double normalized_margin = 0.0;
  double kkt_residual = 1.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  /// True once L < 1/n was observed.
  bool reached_loss_below_inv_n = false;
  std::int64_t first_step_below_inv_n = -1;
  /// Stopped on the loss and residual targets rather than max_steps.
  bool converged = false;
  std::int64_t steps_taken = 0;
  std::int64_t rejected_steps = 0;
  int init_attempts = 1;
  double final_learning_rate = 0.0;
};

/// CSV with header step,loss,min_margin,param_norm,normalized_margin,kkt_residual.
std::string trace_to_csv(const TrainTrace& trace);

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, TrainTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

struct TrainResult {
  NetworkParams net;
  TrainTrace trace;
};

/**
 * Full-batch gradient descent from init_small(d, k, ...).
 *
 * The loss gradient is carried in log scale so that steps stay representable
 * after the loss itself underflows. Stops when loss <= loss_target and the
 * stationarity residual <= kkt_residual_target at a checkpoint, or after
 * max_steps iterations (rejected steps count).
 */
TrainResult train(const LabeledDataset& data, Index width, const TrainConfig& cfg);

/// Same as train() but starting from the given parameters.
TrainResult train_from(const LabeledDataset& data, NetworkParams init,
                       const TrainConfig& cfg);

}  // namespace kktleak

#pragma once

#include "kktleak/network.hpp"

#include <vector>

namespace kktleak {

/// Location -b_j / w_j where neuron j switches on or off.
struct Breakpoint {
  double location = 0.0;
  Index neuron = 0;
};

struct Segment {
  double slope = 0.0;
  double intercept = 0.0;

  double at(double x) const { return slope * x + intercept; }
};

/**
 * Continuous piecewise-linear function on the real line.
 *
 * Segment s covers [breakpoints[s-1], breakpoints[s]], with the first and last
 * segments unbounded. There is always one more segment than breakpoints.
 */
class PiecewiseLinear {
 public:
  /// Validates ordering, segment count and continuity (1e-9 relative to the
  /// magnitudes involved; `value_scale` adds to that magnitude, e.g. for
  /// terms that cancel inside the segment sums).
  PiecewiseLinear(std::vector<double> breakpoints,
                  std::vector<Segment> segments, double value_scale = 0.0);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Index of the segment containing x (right-continuous at breakpoints).
  std::size_t segment_index(double x) const;
  double evaluate(double x) const;

  /// Left/right end of segment s; +-infinity for the unbounded ends.
  double left(std::size_t s) const;
  double right(std::size_t s) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<Segment> segments_;
};

/// |w_j| must exceed this for neuron j to produce a breakpoint.
double dead_neuron_threshold(const NetworkParams& net);

/**
 * Breakpoints of a univariate network, sorted by location then neuron index.
 * Neurons whose |w_j| is below dead_neuron_threshold() are skipped.
 * Throws WrongDimension unless input_dim() == 1.
 */
std::vector<Breakpoint> breakpoints(const NetworkParams& net);

/// Exact piecewise-linear form of a univariate network. Breakpoints within
/// 1e-9 times their range of the first member of a group are merged into
/// that member's location; neurons with v_j = 0 are skipped. Throws
/// WrongDimension.
PiecewiseLinear to_piecewise_linear(const NetworkParams& net);

}  // namespace kktleak

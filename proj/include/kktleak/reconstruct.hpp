#pragma once

#include "kktleak/kkt.hpp"
#include "kktleak/network.hpp"
#include "kktleak/piecewise.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace kktleak {

/**
 * Single-neuron univariate network: the unique x on the neuron's active side
 * with |Phi(x)| = m. Throws WrongDimension for d != 1, InvalidInput for
 * k != 1 or m <= 0, DegenerateNetwork when v = 0 or w = 0.
 */
double recover_single(const NetworkParams& net, double m);

struct ToleranceConfig {
  /// Flat iff |slope| <= flatness_rel * median |slope| over all segments.
  double flatness_rel = 1e-6;
  /// On the margin iff ||value| - m| <= margin_rel * m.
  double margin_rel = 1e-3;
  /// Candidates closer than merge_rel * (breakpoint range) are merged.
  double merge_rel = 1e-6;
};

struct IntervalAnalysis {
  double left = 0.0;   // -inf for the first segment
  double right = 0.0;  // +inf for the last segment
  double slope = 0.0;
  double intercept = 0.0;
  bool is_flat = false;
  /// Flat with |value| within tolerance of m.
  bool is_on_margin = false;
  /// Solutions of slope x + intercept = +-m inside [left, right].
  std::vector<double> crossings;
  /// Finite endpoints within tolerance of +-m, used for a sign with no
  /// crossing inside the interval.
  std::vector<double> touches;

  /// crossings followed by touches; at most one point per sign.
  std::vector<double> margin_points() const;
};

std::vector<IntervalAnalysis> analyze_intervals(const PiecewiseLinear& pl, double m,
                                                const ToleranceConfig& tol = {});

enum class Provenance { crossing, flat_boundary };
std::string to_string(Provenance p);

/// What happened at one breakpoint triple (x, y, z) of the candidate scan.
struct WindowRecord {
  std::size_t index = 0;  // position of x among the breakpoints
  /// Neither [x,y] nor [y,z] is on the margin; margin points were added.
  bool crossing_case = false;
  std::size_t crossing_points = 0;
  /// [x,y] and the look-ahead [z,t] are both on the margin; {y,z} added.
  bool flat_case = false;
  /// flat_case with [y,z] itself off the margin, so on/off/on alternates
  /// around [y,z]. flat_case alone does not look at [y,z].
  bool alternating_around_yz = false;
};

struct CandidateSet {
  std::vector<double> points;  // sorted, merged
  std::vector<Provenance> provenance;
  double guaranteed_fraction = 0.25;
  /// Fewer than 3 breakpoints: the scan has no windows.
  bool degenerate = false;
  std::vector<WindowRecord> windows;

  /// Largest crossing_points over windows.
  std::size_t max_window_points() const;
  /// Windows where flat_case and alternating_around_yz disagree.
  std::size_t flat_rule_disagreements() const;
};

/**
 * Scans consecutive breakpoint triples (x, y, z):
 *  - neither [x,y] nor [y,z] on the margin: add the margin points of both;
 *  - [x,y] on the margin, a fourth breakpoint t exists and [z,t] is on the
 *    margin: add y and z.
 * The unbounded end segments are never scanned.
 */
CandidateSet build_candidate_set(const PiecewiseLinear& pl, double m,
                                 const ToleranceConfig& tol = {});

/// CSV with header x,provenance.
std::string candidates_to_csv(const CandidateSet& set);

struct LemmaAudit {
  /// Sorted support locations and the breakpoint count strictly between
  /// each consecutive pair.
  std::vector<double> support_points;
  std::vector<std::size_t> breakpoints_per_gap;
  std::size_t gap_violations = 0;  // gaps with more than 2 breakpoints
  std::size_t total_crossings = 0;
  std::size_t crossing_bound = 0;  // 6 n
  bool crossing_violation = false;
  bool flagged() const { return gap_violations > 0 || crossing_violation; }
};

/// Counts breakpoints between consecutive support points and margin points
/// over the whole line, against the bounds 2 per gap and 6n in total.
LemmaAudit interval_lemma_audit(const PiecewiseLinear& pl, const LabeledDataset& data,
                                const KktReport& report, const ToleranceConfig& tol = {});

}  // namespace kktleak

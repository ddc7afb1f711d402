#include "kktleak/reconstruct.hpp"

#include "kktleak/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace kktleak {
namespace {

double median_abs_slope(const PiecewiseLinear& pl) {
  std::vector<double> s;
  for (const Segment& seg : pl.segments()) s.push_back(std::abs(seg.slope));
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

/// Sorted copy with points closer than `radius` to their predecessor dropped.
/// A crossing displaces a flat boundary it merges with.
void merge_sorted(std::vector<std::pair<double, Provenance>>& pts, double radius,
                  CandidateSet& out) {
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [x, prov] : pts) {
    if (!out.points.empty() && x - out.points.back() <= radius) {
      if (prov == Provenance::crossing && out.provenance.back() != Provenance::crossing) {
        out.points.back() = x;
        out.provenance.back() = prov;
      }
      continue;
    }
    out.points.push_back(x);
    out.provenance.push_back(prov);
  }
}

std::size_t count_distinct(std::vector<double> xs, double radius) {
  std::sort(xs.begin(), xs.end());
  std::size_t count = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i == 0 || xs[i] - xs[i - 1] > radius) ++count;
  }
  return count;
}

double merge_radius(const PiecewiseLinear& pl, const ToleranceConfig& tol) {
  const auto& b = pl.breakpoints();
  return b.size() < 2 ? 0.0 : tol.merge_rel * (b.back() - b.front());
}

}  // namespace

double recover_single(const NetworkParams& net, double m) {
  if (net.input_dim() != 1) throw WrongDimension("recover_single needs input_dim 1");
  if (net.width() != 1) throw InvalidInput("recover_single needs exactly one neuron");
  if (!(m > 0.0)) throw InvalidInput("margin must be positive");
  const double w = net.weights()(0, 0);
  const double b = net.biases()(0);
  const double v = net.output_weights()(0);
  if (v == 0.0 || w == 0.0) {
    throw DegenerateNetwork("single neuron has zero input or output weight");
  }
  // On the active side Phi(x) = v (w x + b), so w x + b = m / |v|.
  return (m / std::abs(v) - b) / w;
}

std::vector<double> IntervalAnalysis::margin_points() const {
  std::vector<double> out = crossings;
  out.insert(out.end(), touches.begin(), touches.end());
  return out;
}

std::vector<IntervalAnalysis> analyze_intervals(const PiecewiseLinear& pl, double m,
                                                const ToleranceConfig& tol) {
  if (!(m > 0.0)) throw InvalidInput("margin must be positive");
  const double flat_thr = tol.flatness_rel * median_abs_slope(pl);
  const double margin_tol = tol.margin_rel * m;

  std::vector<IntervalAnalysis> out;
  for (std::size_t s = 0; s < pl.segments().size(); ++s) {
    const Segment& seg = pl.segments()[s];
    IntervalAnalysis ia;
    ia.left = pl.left(s);
    ia.right = pl.right(s);
    ia.slope = seg.slope;
    ia.intercept = seg.intercept;
    ia.is_flat = std::abs(seg.slope) <= flat_thr;

    std::vector<double> ends;
    if (std::isfinite(ia.left)) ends.push_back(ia.left);
    if (std::isfinite(ia.right)) ends.push_back(ia.right);

    if (ia.is_flat) {
      bool near = true;
      if (ends.empty()) near = std::abs(std::abs(seg.intercept) - m) <= margin_tol;
      for (const double e : ends) {
        near = near && std::abs(std::abs(seg.at(e)) - m) <= margin_tol;
      }
      ia.is_on_margin = near;
    }
    if (!ia.is_on_margin) {
      for (const double sign : {1.0, -1.0}) {
        if (!ia.is_flat) {
          const double x = (sign * m - seg.intercept) / seg.slope;
          if (x >= ia.left && x <= ia.right) {
            ia.crossings.push_back(x);
            continue;
          }
        }
        for (const double e : ends) {
          if (std::abs(seg.at(e) - sign * m) <= margin_tol) {
            ia.touches.push_back(e);
            break;
          }
        }
      }
    }
    out.push_back(std::move(ia));
  }
  return out;
}

std::string to_string(Provenance p) {
  return p == Provenance::crossing ? "crossing" : "flat-boundary";
}

std::size_t CandidateSet::max_window_points() const {
  std::size_t best = 0;
  for (const WindowRecord& w : windows) best = std::max(best, w.crossing_points);
  return best;
}

std::size_t CandidateSet::flat_rule_disagreements() const {
  std::size_t n = 0;
  for (const WindowRecord& w : windows) n += w.flat_case && !w.alternating_around_yz;
  return n;
}

CandidateSet build_candidate_set(const PiecewiseLinear& pl, double m,
                                 const ToleranceConfig& tol) {
  CandidateSet set;
  const auto& bp = pl.breakpoints();
  const std::size_t g = bp.size();
  if (g < 3) {
    set.degenerate = true;
    return set;
  }
  const std::vector<IntervalAnalysis> ia = analyze_intervals(pl, m, tol);
  const double radius = merge_radius(pl, tol);
  // Bounded segment [bp[i], bp[i+1]] is segment i + 1.
  auto interval = [&](std::size_t i) -> const IntervalAnalysis& { return ia[i + 1]; };

  std::vector<std::pair<double, Provenance>> raw;
  for (std::size_t i = 0; i + 2 < g; ++i) {
    WindowRecord w;
    w.index = i;
    const IntervalAnalysis& xy = interval(i);
    const IntervalAnalysis& yz = interval(i + 1);
    if (!xy.is_on_margin && !yz.is_on_margin) {
      w.crossing_case = true;
      std::vector<double> pts = xy.margin_points();
      const std::vector<double> more = yz.margin_points();
      pts.insert(pts.end(), more.begin(), more.end());
      w.crossing_points = count_distinct(pts, radius);
      for (const double p : pts) raw.emplace_back(p, Provenance::crossing);
    }
    if (xy.is_on_margin && i + 3 < g && interval(i + 2).is_on_margin) {
      w.flat_case = true;
      w.alternating_around_yz = !yz.is_on_margin;
      raw.emplace_back(bp[i + 1], Provenance::flat_boundary);
      raw.emplace_back(bp[i + 2], Provenance::flat_boundary);
    }
    set.windows.push_back(w);
  }
  merge_sorted(raw, radius, set);
  return set;
}

std::string candidates_to_csv(const CandidateSet& set) {
  std::ostringstream out;
  out << "x,provenance\n";
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    out << fmt::format("{},{}\n", set.points[i], to_string(set.provenance[i]));
  }
  return out.str();
}

LemmaAudit interval_lemma_audit(const PiecewiseLinear& pl, const LabeledDataset& data,
                                const KktReport& report, const ToleranceConfig& tol) {
  if (data.dim() != 1) throw WrongDimension("interval audit needs univariate data");
  LemmaAudit audit;
  for (const Index i : report.support_indices) {
    audit.support_points.push_back(data.points()(i, 0));
  }
  std::sort(audit.support_points.begin(), audit.support_points.end());
  const auto& bp = pl.breakpoints();
  for (std::size_t s = 0; s + 1 < audit.support_points.size(); ++s) {
    const double lo = audit.support_points[s];
    const double hi = audit.support_points[s + 1];
    const auto count = static_cast<std::size_t>(std::count_if(
        bp.begin(), bp.end(), [&](double x) { return x > lo && x < hi; }));
    audit.breakpoints_per_gap.push_back(count);
    if (count > 2) ++audit.gap_violations;
  }
  std::vector<double> all;
  if (report.margin_m > 0.0) {
    for (const IntervalAnalysis& ia : analyze_intervals(pl, report.margin_m, tol)) {
      const std::vector<double> pts = ia.margin_points();
      all.insert(all.end(), pts.begin(), pts.end());
    }
  }
  audit.total_crossings = count_distinct(all, merge_radius(pl, tol));
  audit.crossing_bound = 6 * static_cast<std::size_t>(data.size());
  audit.crossing_violation = audit.total_crossings > audit.crossing_bound;
  return audit;
}

}  // namespace kktleak

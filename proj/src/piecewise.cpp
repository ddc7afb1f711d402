#include "kktleak/piecewise.hpp"

#include "kktleak/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace kktleak {
namespace {

void require_univariate(const NetworkParams& net) {
  if (net.input_dim() != 1) {
    throw WrongDimension("piecewise-linear analysis needs input_dim 1, got " +
                         std::to_string(net.input_dim()));
  }
}

}  // namespace

PiecewiseLinear::PiecewiseLinear(std::vector<double> breakpoints,
                                 std::vector<Segment> segments, double value_scale)
    : breakpoints_(std::move(breakpoints)), segments_(std::move(segments)) {
  if (segments_.size() != breakpoints_.size() + 1) {
    throw InvalidInput("piecewise-linear function needs one more segment than breakpoints");
  }
  for (const double x : breakpoints_) {
    if (!std::isfinite(x)) throw InvalidInput("breakpoints must be finite");
  }
  for (const Segment& s : segments_) {
    if (!std::isfinite(s.slope) || !std::isfinite(s.intercept)) {
      throw InvalidInput("segment coefficients must be finite");
    }
  }
  const double span =
      breakpoints_.empty() ? 0.0 : breakpoints_.back() - breakpoints_.front();
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    const double x = breakpoints_[i];
    if (i > 0 && !(x > breakpoints_[i - 1])) {
      throw InvalidInput("breakpoints must be strictly increasing");
    }
    const Segment& l = segments_[i];
    const Segment& r = segments_[i + 1];
    // Scale covers the magnitudes that cancel when the two sides are compared.
    const double scale = 1.0 + value_scale + std::abs(l.intercept) + std::abs(r.intercept) +
                         (std::abs(l.slope) + std::abs(r.slope)) * (std::abs(x) + span);
    if (std::abs(l.at(x) - r.at(x)) > 1e-9 * scale) {
      throw InvalidInput("piecewise-linear function is discontinuous at x=" +
                         std::to_string(x));
    }
  }
}

std::size_t PiecewiseLinear::segment_index(double x) const {
  return static_cast<std::size_t>(
      std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) -
      breakpoints_.begin());
}

double PiecewiseLinear::evaluate(double x) const {
  return segments_[segment_index(x)].at(x);
}

double PiecewiseLinear::left(std::size_t s) const {
  return s == 0 ? -std::numeric_limits<double>::infinity() : breakpoints_[s - 1];
}

double PiecewiseLinear::right(std::size_t s) const {
  return s == breakpoints_.size() ? std::numeric_limits<double>::infinity()
                                  : breakpoints_[s];
}

double dead_neuron_threshold(const NetworkParams& net) {
  const double wmax = net.weights().cwiseAbs().maxCoeff();
  return 1e-12 * std::max(1.0, wmax);
}

std::vector<Breakpoint> breakpoints(const NetworkParams& net) {
  require_univariate(net);
  const double thr = dead_neuron_threshold(net);
  std::vector<Breakpoint> out;
  for (Index j = 0; j < net.width(); ++j) {
    const double w = net.weights()(j, 0);
    if (std::abs(w) > thr) out.push_back({-net.biases()(j) / w, j});
  }
  std::sort(out.begin(), out.end(), [](const Breakpoint& a, const Breakpoint& b) {
    return a.location < b.location || (a.location == b.location && a.neuron < b.neuron);
  });
  return out;
}

PiecewiseLinear to_piecewise_linear(const NetworkParams& net) {
  // Kinks of neurons with v_j = 0 do not change the function.
  std::vector<Breakpoint> raw = breakpoints(net);
  std::erase_if(raw, [&](const Breakpoint& bp) { return net.output_weights()(bp.neuron) == 0.0; });
  const double thr = dead_neuron_threshold(net);

  // Group nearly coincident breakpoints; group g's boundary is its first member.
  std::vector<double> bounds;
  std::vector<std::size_t> group(raw.size());
  double span = 0.0;
  if (!raw.empty()) {
    span = raw.back().location - raw.front().location;
    const double radius = 1e-9 * span;
    bounds.push_back(raw.front().location);
    for (std::size_t r = 0; r < raw.size(); ++r) {
      if (raw[r].location - bounds.back() > radius) bounds.push_back(raw[r].location);
      group[r] = bounds.size() - 1;
    }
  }

  // Neuron with boundary in group g is active on segments > g if w > 0 and on
  // segments <= g if w < 0.
  std::vector<Segment> segs(bounds.size() + 1);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    const Index j = raw[r].neuron;
    const double w = net.weights()(j, 0);
    const double vw = net.output_weights()(j) * w;
    const double vb = net.output_weights()(j) * net.biases()(j);
    const std::size_t begin = w > 0 ? group[r] + 1 : 0;
    const std::size_t end = w > 0 ? segs.size() : group[r] + 1;
    for (std::size_t s = begin; s < end; ++s) {
      segs[s].slope += vw;
      segs[s].intercept += vb;
    }
  }
  // Dead-direction neurons: affine everywhere when the bias is positive.
  for (Index j = 0; j < net.width(); ++j) {
    const double w = net.weights()(j, 0);
    if (std::abs(w) > thr || net.biases()(j) <= 0.0) continue;
    for (Segment& s : segs) {
      s.slope += net.output_weights()(j) * w;
      s.intercept += net.output_weights()(j) * net.biases()(j);
    }
  }
  // Merging moves a kink by at most 1e-9 * span, which opens a gap of up to
  // |v_j w_j| times that; scale the continuity check by those magnitudes.
  double magnitude = 0.0;
  for (const Breakpoint& bp : raw) {
    const double vw = std::abs(net.output_weights()(bp.neuron) * net.weights()(bp.neuron, 0));
    magnitude += vw * (std::abs(bp.location) + span);
  }
  return PiecewiseLinear(std::move(bounds), std::move(segs), magnitude);
}

}  // namespace kktleak

#include "kktleak/kkt.hpp"

#include "kktleak/error.hpp"
#include "kktleak/nnls.hpp"

#include <json.hpp>

#include <Eigen/QR>

#include <cmath>
#include <limits>

namespace kktleak {
namespace {

void require_compatible(const NetworkParams& net, const LabeledDataset& data) {
  if (net.input_dim() != data.dim()) {
    throw DimensionMismatch("network input_dim " + std::to_string(net.input_dim()) +
                            " does not match data dimension " +
                            std::to_string(data.dim()));
  }
}

MatrixXd active_mask(const MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

/// <r, grad Phi(x_i)> for every point.
VectorXd inner_with_gradients(const NetworkParams& net, const LabeledDataset& data,
                              const MatrixXd& z, const NetworkParams& r) {
  const MatrixXd s = active_mask(z);
  MatrixXd zr = data.points() * r.weights().transpose();
  zr.rowwise() += r.biases().transpose();
  return s.cwiseProduct(zr) * net.output_weights() +
         z.cwiseMax(0.0) * r.output_weights();
}

}  // namespace

MarginInfo margin(const NetworkParams& net, const LabeledDataset& data) {
  require_compatible(net, data);
  const VectorXd a = forward_batch(net, data.points()).cwiseAbs();
  if (a.maxCoeff() == 0.0) {
    throw DegenerateNetwork("network output is zero on every data point");
  }
  MarginInfo info;
  info.m = a.minCoeff();
  for (Index i = 0; i < a.size(); ++i) {
    if (a(i) <= info.m * (1.0 + 1e-9)) info.argmin.push_back(i);
  }
  return info;
}

NetworkParams stationarity_residual_vector(const NetworkParams& net,
                                           const LabeledDataset& data,
                                           const VectorXd& coeffs) {
  require_compatible(net, data);
  if (coeffs.size() != data.size()) {
    throw DimensionMismatch("one coefficient per data point is required");
  }
  const MatrixXd z = pre_activations(net, data.points());
  const MatrixXd s = active_mask(z);
  const VectorXd& v = net.output_weights();
  MatrixXd sw = s.transpose() * coeffs.asDiagonal() * data.points();  // k x d
  MatrixXd w = net.weights() - v.asDiagonal() * sw;
  VectorXd b = net.biases() - v.cwiseProduct(s.transpose() * coeffs);
  VectorXd out = v - z.cwiseMax(0.0).transpose() * coeffs;
  return NetworkParams(std::move(w), std::move(b), std::move(out));
}

KktReport estimate_lambdas(const NetworkParams& net, const LabeledDataset& data,
                           double support_slack) {
  if (!(support_slack >= 0.0)) throw InvalidInput("support_slack must be >= 0");
  const MarginInfo mi = margin(net, data);
  const Index n = data.size();
  const MatrixXd z = pre_activations(net, data.points());
  const VectorXd phi = z.cwiseMax(0.0) * net.output_weights();
  const VectorXd& y = data.labels();

  KktReport report;
  report.margin_m = mi.m;
  report.support_slack = support_slack;
  report.sigma_primes = active_mask(z);
  for (Index i = 0; i < n; ++i) {
    if (std::abs(y(i) * phi(i) - mi.m) <= support_slack * mi.m) {
      report.support_indices.push_back(i);
    }
  }
  const double theta_norm = net.norm();
  if (report.support_indices.empty() || theta_norm == 0.0) {
    report.stationarity_residual = 1.0;
    return report;
  }

  // Gram matrix of the columns y_i grad Phi(x_i) restricted to the support.
  const auto& sup = report.support_indices;
  const Index p = static_cast<Index>(sup.size());
  MatrixXd xs(p, data.dim()), hs(p, net.width()), ss(p, net.width());
  VectorXd ys(p);
  for (Index a = 0; a < p; ++a) {
    xs.row(a) = data.points().row(sup[a]);
    hs.row(a) = z.row(sup[a]).cwiseMax(0.0);
    ss.row(a) = report.sigma_primes.row(sup[a]);
    ys(a) = y(sup[a]);
  }
  const VectorXd v2 = net.output_weights().cwiseAbs2();
  MatrixXd xx = xs * xs.transpose();
  xx.array() += 1.0;
  MatrixXd gram = hs * hs.transpose() +
                  (ss * v2.asDiagonal() * ss.transpose()).cwiseProduct(xx);
  gram = ys.asDiagonal() * gram * ys.asDiagonal();
  // <theta, grad Phi(x_i)> = 2 Phi(x_i) by homogeneity.
  VectorXd c(p);
  for (Index a = 0; a < p; ++a) c(a) = 2.0 * ys(a) * phi(sup[a]);

  const NnlsResult sol = nnls_gram(gram, c);
  report.nnls_iterations = sol.iterations;
  report.nnls_converged = sol.converged;

  VectorXd lambdas = VectorXd::Zero(n);
  for (Index a = 0; a < p; ++a) lambdas(sup[a]) = sol.x(a);
  auto residual_of = [&](const VectorXd& lam) {
    return stationarity_residual_vector(net, data, lam.cwiseProduct(y)).norm();
  };
  double res = residual_of(lambdas);

  // Refine on the positive set with the explicitly formed residual; the Gram
  // form alone loses accuracy to cancellation.
  for (int round = 0; round < 3; ++round) {
    std::vector<Index> pos;
    for (Index a = 0; a < p; ++a) {
      if (lambdas(sup[a]) > 0.0) pos.push_back(a);
    }
    if (pos.empty()) break;
    const NetworkParams r = stationarity_residual_vector(net, data, lambdas.cwiseProduct(y));
    const VectorXd inner = inner_with_gradients(net, data, z, r);
    const Index q = static_cast<Index>(pos.size());
    MatrixXd gq(q, q);
    VectorXd rhs(q);
    for (Index a = 0; a < q; ++a) {
      rhs(a) = ys(pos[a]) * inner(sup[pos[a]]);
      for (Index b = 0; b < q; ++b) gq(a, b) = gram(pos[a], pos[b]);
    }
    const VectorXd delta = gq.completeOrthogonalDecomposition().solve(rhs);
    VectorXd trial = lambdas;
    for (Index a = 0; a < q; ++a) {
      trial(sup[pos[a]]) = std::max(0.0, trial(sup[pos[a]]) + delta(a));
    }
    const double trial_res = residual_of(trial);
    if (!(trial_res < res)) break;
    lambdas = trial;
    res = trial_res;
  }
  report.lambdas = lambdas;
  report.stationarity_residual = res / theta_norm;
  return report;
}

DiagnosticBounds diagnostic_bounds(const KktReport& report, const NetworkParams& net,
                                   const LabeledDataset& data, LossKind kind) {
  require_compatible(net, data);
  const Index n = data.size();
  DiagnosticBounds db;
  const MatrixXd gram = data.points() * data.points().transpose();
  db.Delta_min = gram.diagonal().minCoeff();
  db.Delta_max = gram.diagonal().maxCoeff();
  db.delta_defined = n >= 2;
  db.delta = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index l = i + 1; l < n; ++l) db.delta = std::max(db.delta, std::abs(gram(i, l)));
  }

  const double m = report.margin_m;
  const double nm1 = static_cast<double>(n - 1);
  const double denom = db.Delta_min + 1.0 - 2.0 * (db.delta + 1.0) * nm1;
  db.upper_bound_applicable = denom > 0.0;
  db.upper_bound_sum =
      db.upper_bound_applicable ? m / denom : std::numeric_limits<double>::infinity();
  db.lower_bound_sum = db.upper_bound_applicable
                           ? (m - (db.delta + 1.0) * nm1 * db.upper_bound_sum) /
                                 (db.Delta_max + 1.0)
                           : -std::numeric_limits<double>::infinity();

  db.sum_plus = VectorXd::Zero(n);
  db.sum_minus = VectorXd::Zero(n);
  const VectorXd& v = net.output_weights();
  if (report.lambdas.size() == n) {
    const MatrixXd& s = report.sigma_primes;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < net.width(); ++j) {
        const double t = v(j) * v(j) * report.lambdas(i) * s(i, j);
        if (v(j) > 0.0) db.sum_plus(i) += t;
        if (v(j) < 0.0) db.sum_minus(i) += t;
      }
    }
  }
  std::vector<bool> on_support(static_cast<std::size_t>(n), false);
  for (const Index i : report.support_indices) on_support[static_cast<std::size_t>(i)] = true;
  const double rel = 1e-9;
  for (Index i = 0; i < n; ++i) {
    const double biggest = std::max(db.sum_plus(i), db.sum_minus(i));
    const bool up = biggest <= db.upper_bound_sum * (1.0 + rel);
    bool low = true;
    if (on_support[static_cast<std::size_t>(i)]) {
      const double own = data.labels()(i) > 0 ? db.sum_plus(i) : db.sum_minus(i);
      low = own >= db.lower_bound_sum - rel * std::abs(db.lower_bound_sum);
    }
    db.upper_ok.push_back(up);
    db.lower_ok.push_back(low);
    db.all_upper_ok = db.all_upper_ok && up;
    db.all_lower_ok = db.all_lower_ok && low;
  }

  db.loss = loss(net, data, kind);
  const double e = std::exp(1.0);
  db.loss_below_threshold = db.loss < 1.0 / (2.0 * e);
  db.margin_lower_ok = !db.loss_below_threshold || m > 1.0 / e;
  return db;
}

KktReport analyze_kkt(const NetworkParams& net, const LabeledDataset& data,
                      double support_slack, LossKind kind) {
  KktReport report = estimate_lambdas(net, data, support_slack);
  report.diagnostics = diagnostic_bounds(report, net, data, kind);
  return report;
}

std::string kkt_report_to_json(const KktReport& report) {
  using nlohmann::json;
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  auto vec = [&](const VectorXd& x) {
    json a = json::array();
    for (Index i = 0; i < x.size(); ++i) a.push_back(num(x(i)));
    return a;
  };
  json sigma = json::array();
  for (Index i = 0; i < report.sigma_primes.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < report.sigma_primes.cols(); ++j) {
      row.push_back(static_cast<int>(report.sigma_primes(i, j)));
    }
    sigma.push_back(row);
  }
  json doc = {{"format_version", kKktReportFormatVersion},
              {"margin_m", num(report.margin_m)},
              {"support_slack", report.support_slack},
              {"support_indices", report.support_indices},
              {"lambdas", vec(report.lambdas)},
              {"stationarity_residual", num(report.stationarity_residual)},
              {"nnls_iterations", report.nnls_iterations},
              {"nnls_converged", report.nnls_converged},
              {"sigma_primes", sigma}};
  if (report.diagnostics) {
    const DiagnosticBounds& d = *report.diagnostics;
    auto bools = [](const std::vector<bool>& b) {
      json a = json::array();
      for (const bool x : b) a.push_back(x);
      return a;
    };
    doc["diagnostics"] = {{"delta", num(d.delta)},
                          {"delta_defined", d.delta_defined},
                          {"Delta_min", num(d.Delta_min)},
                          {"Delta_max", num(d.Delta_max)},
                          {"upper_bound_sum", num(d.upper_bound_sum)},
                          {"upper_bound_applicable", d.upper_bound_applicable},
                          {"lower_bound_sum", num(d.lower_bound_sum)},
                          {"sum_plus", vec(d.sum_plus)},
                          {"sum_minus", vec(d.sum_minus)},
                          {"upper_ok", bools(d.upper_ok)},
                          {"lower_ok", bools(d.lower_ok)},
                          {"all_upper_ok", d.all_upper_ok},
                          {"all_lower_ok", d.all_lower_ok},
                          {"loss", num(d.loss)},
                          {"loss_below_threshold", d.loss_below_threshold},
                          {"margin_lower_ok", d.margin_lower_ok}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace kktleak

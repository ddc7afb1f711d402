#include "kktleak/training.hpp"

#include "kktleak/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace kktleak {
namespace {

constexpr double kLn2 = 0.69314718055994530942;

void require_compatible(const NetworkParams& net, const LabeledDataset& data) {
  if (net.input_dim() != data.dim()) {
    throw DimensionMismatch("network input_dim " + std::to_string(net.input_dim()) +
                            " does not match data dimension " +
                            std::to_string(data.dim()));
  }
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double log_pointwise_loss(double z, LossKind kind) {
  if (kind == LossKind::exponential) return -z;
  if (z > 30.0) return -z - 0.5 * std::exp(-z);
  return std::log(softplus(-z));
}

/// log |l'(z)|.
double log_loss_slope(double z, LossKind kind) {
  return kind == LossKind::exponential ? -z : -softplus(z);
}

/// Forward pass plus everything the gradient needs, with the loss slopes
/// stored as exp(log_scale) * weights.
struct Evaluation {
  MatrixXd z;  // pre-activations, n x k
  VectorXd out;
  double log_loss = 0.0;
  double log_scale = 0.0;
  VectorXd weights;
};

Evaluation evaluate(const NetworkParams& net, const LabeledDataset& data,
                    LossKind kind) {
  Evaluation e;
  e.z = pre_activations(net, data.points());
  e.out = e.z.cwiseMax(0.0) * net.output_weights();
  const Index n = data.size();
  VectorXd log_l(n), log_s(n);
  for (Index i = 0; i < n; ++i) {
    const double margin = data.labels()(i) * e.out(i);
    log_l(i) = log_pointwise_loss(margin, kind);
    log_s(i) = log_loss_slope(margin, kind);
  }
  const double lmax = log_l.maxCoeff();
  e.log_loss = lmax + std::log((log_l.array() - lmax).exp().sum()) -
               std::log(static_cast<double>(n));
  e.log_scale = log_s.maxCoeff();
  e.weights = (log_s.array() - e.log_scale).exp();
  return e;
}

/// Gradient divided by exp(e.log_scale).
NetworkParams scaled_gradient(const NetworkParams& net, const LabeledDataset& data,
                              const Evaluation& e) {
  const double n = static_cast<double>(data.size());
  const VectorXd r = -(e.weights.cwiseProduct(data.labels())) / n;
  const MatrixXd h = e.z.cwiseMax(0.0);
  const VectorXd gv = h.transpose() * r;
  MatrixXd g = (r * net.output_weights().transpose()).cwiseProduct(
      (e.z.array() > 0.0).cast<double>().matrix());
  MatrixXd gw = g.transpose() * data.points();
  VectorXd gb = g.colwise().sum().transpose();
  return NetworkParams(std::move(gw), std::move(gb), gv);
}

TraceRecord make_record(std::int64_t step, const NetworkParams& net,
                        const LabeledDataset& data, const Evaluation& e,
                        double support_slack) {
  TraceRecord rec;
  rec.step = step;
  rec.loss = std::exp(e.log_loss);
  rec.min_margin = data.labels().cwiseProduct(e.out).minCoeff();
  rec.param_norm = net.norm();
  const double sq = net.squared_norm();
  rec.normalized_margin = sq > 0.0 ? rec.min_margin / sq : 0.0;
  try {
    rec.kkt_residual = estimate_lambdas(net, data, support_slack).stationarity_residual;
  } catch (const DegenerateNetwork&) {
    rec.kkt_residual = 1.0;
  }
  return rec;
}

}  // namespace

std::string to_string(LossKind kind) {
  return kind == LossKind::exponential ? "exponential" : "logistic";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "exponential" || name == "exp") return LossKind::exponential;
  if (name == "logistic" || name == "log") return LossKind::logistic;
  throw InvalidInput("unknown loss kind '" + name + "'");
}

double pointwise_loss(double z, LossKind kind) {
  return kind == LossKind::exponential ? std::exp(-z) : softplus(-z);
}

double loss(const NetworkParams& net, const LabeledDataset& data, LossKind kind) {
  require_compatible(net, data);
  const VectorXd out = forward_batch(net, data.points());
  double total = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    total += pointwise_loss(data.labels()(i) * out(i), kind);
  }
  return total / static_cast<double>(data.size());
}

double log_loss(const NetworkParams& net, const LabeledDataset& data, LossKind kind) {
  require_compatible(net, data);
  return evaluate(net, data, kind).log_loss;
}

NetworkParams gradient(const NetworkParams& net, const LabeledDataset& data,
                       LossKind kind) {
  require_compatible(net, data);
  const Evaluation e = evaluate(net, data, kind);
  return scaled_gradient(net, data, e).scaled(std::exp(e.log_scale));
}

NetworkParams init_small(Index d, Index k, double scale, std::uint64_t seed) {
  if (d < 1 || k < 1) throw InvalidInput("init_small needs d >= 1 and k >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidInput("init_small needs a positive finite scale");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double wstd = scale / std::sqrt(static_cast<double>(d));
  MatrixXd w(k, d);
  VectorXd b(k), v(k);
  for (Index j = 0; j < k; ++j) {
    for (Index c = 0; c < d; ++c) w(j, c) = wstd * normal(rng);
    b(j) = scale * normal(rng);
    v(j) = scale * normal(rng);
  }
  return NetworkParams(std::move(w), std::move(b), std::move(v));
}

void TrainConfig::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw InvalidInput(std::string(name) + " must be positive");
    }
  };
  positive(init_scale, "init_scale");
  positive(learning_rate, "learning_rate");
  positive(loss_target, "loss_target");
  positive(kkt_residual_target, "kkt_residual_target");
  positive(support_slack, "support_slack");
  if (!(lr_growth >= 1.0) || !std::isfinite(lr_growth)) {
    throw InvalidInput("lr_growth must be >= 1");
  }
  if (!(growth_cap_loss >= 0.0)) throw InvalidInput("growth_cap_loss must be >= 0");
  if (max_steps < 1) throw InvalidInput("max_steps must be >= 1");
  if (checkpoint_every < 1) throw InvalidInput("checkpoint_every must be >= 1");
  if (!(reject_tolerance >= 0.0)) throw InvalidInput("reject_tolerance must be >= 0");
  if (!(min_learning_rate >= 0.0)) throw InvalidInput("min_learning_rate must be >= 0");
  if (!(max_relative_step >= 0.0)) throw InvalidInput("max_relative_step must be >= 0");
  if (max_init_attempts < 1) throw InvalidInput("max_init_attempts must be >= 1");
}

std::string trace_to_csv(const TrainTrace& trace) {
  std::ostringstream out;
  out << "step,loss,min_margin,param_norm,normalized_margin,kkt_residual\n";
  for (const TraceRecord& r : trace.records) {
    out << fmt::format("{},{},{},{},{},{}\n", r.step, r.loss, r.min_margin,
                       r.param_norm, r.normalized_margin, r.kkt_residual);
  }
  return out.str();
}

TrainResult train(const LabeledDataset& data, Index width, const TrainConfig& cfg) {
  cfg.validate();
  int attempts = 0;
  for (;;) {
    // Attempt 0 is exactly init_small(..., rng_seed).
    const std::uint64_t seed =
        cfg.rng_seed + static_cast<std::uint64_t>(attempts) * 0x9E3779B97F4A7C15ULL;
    NetworkParams init = init_small(data.dim(), width, cfg.init_scale, seed);
    ++attempts;
    const Evaluation e = evaluate(init, data, cfg.loss_kind);
    const bool dead = scaled_gradient(init, data, e).squared_norm() == 0.0;
    if (!dead || attempts >= cfg.max_init_attempts) {
      TrainResult result = train_from(data, std::move(init), cfg);
      result.trace.init_attempts = attempts;
      return result;
    }
  }
}

TrainResult train_from(const LabeledDataset& data, NetworkParams init,
                       const TrainConfig& cfg) {
  cfg.validate();
  require_compatible(init, data);
  const double log_inv_n = -std::log(static_cast<double>(data.size()));
  const double log_min_lr =
      cfg.min_learning_rate > 0.0 ? std::log(cfg.min_learning_rate)
                                  : -std::numeric_limits<double>::infinity();
  const double log_growth = std::log(cfg.lr_growth);
  const double log_cap = cfg.growth_cap_loss > 0.0
                             ? std::log(cfg.growth_cap_loss)
                             : -std::numeric_limits<double>::infinity();
  const double log_target = std::log(cfg.loss_target);

  NetworkParams net = std::move(init);
  Evaluation cur = evaluate(net, data, cfg.loss_kind);
  NetworkParams dir = scaled_gradient(net, data, cur);
  double log_lr = std::log(cfg.learning_rate);

  TrainTrace trace;
  auto note_loss = [&](std::int64_t step) {
    if (!trace.reached_loss_below_inv_n && cur.log_loss < log_inv_n) {
      trace.reached_loss_below_inv_n = true;
      trace.first_step_below_inv_n = step;
    }
  };
  note_loss(0);
  trace.records.push_back(make_record(0, net, data, cur, cfg.support_slack));

  std::int64_t step = 0;
  while (step < cfg.max_steps) {
    ++step;
    double log_c = log_lr + cur.log_scale;
    const double dnorm = dir.norm();
    if (cfg.max_relative_step > 0.0 && dnorm > 0.0) {
      log_c = std::min(log_c, std::log(cfg.max_relative_step * net.norm() / dnorm));
    }
    const double c = std::exp(log_c);

    bool finite = std::isfinite(c);
    Evaluation trial;
    std::optional<NetworkParams> next;
    if (finite) {
      MatrixXd w = net.weights() - c * dir.weights();
      VectorXd b = net.biases() - c * dir.biases();
      VectorXd v = net.output_weights() - c * dir.output_weights();
      finite = w.allFinite() && b.allFinite() && v.allFinite();
      if (finite) {
        next.emplace(std::move(w), std::move(b), std::move(v));
        trial = evaluate(*next, data, cfg.loss_kind);
        finite = std::isfinite(trial.log_loss);
      }
    }

    if (!finite && !cfg.backtracking) {
      trace.steps_taken = step;
      trace.final_learning_rate = std::exp(log_lr);
      throw TrainingDiverged(
          fmt::format("loss became non-finite at step {}", step), std::move(trace));
    }
    const bool reject = cfg.backtracking &&
                        (!finite || trial.log_loss > cur.log_loss + cfg.reject_tolerance);
    if (reject) {
      log_lr = std::max(log_lr - kLn2, log_min_lr);
      ++trace.rejected_steps;
    } else {
      // An increase inside the tolerance is kept but does not grow the rate.
      const bool increased = trial.log_loss > cur.log_loss;
      net = std::move(*next);
      cur = std::move(trial);
      dir = scaled_gradient(net, data, cur);
      if (!increased && cur.log_loss >= log_cap) log_lr += log_growth;
      note_loss(step);
    }

    if (step % cfg.checkpoint_every == 0 || step == cfg.max_steps) {
      trace.records.push_back(make_record(step, net, data, cur, cfg.support_slack));
      const TraceRecord& r = trace.records.back();
      if (cur.log_loss <= log_target && r.kkt_residual <= cfg.kkt_residual_target) {
        trace.converged = true;
        break;
      }
    }
  }
  trace.steps_taken = step;
  trace.final_learning_rate = std::exp(log_lr);
  return TrainResult{std::move(net), std::move(trace)};
}

}  // namespace kktleak

#include "kktleak/experiment.hpp"

#include "kktleak/distributions.hpp"
#include "kktleak/error.hpp"
#include "kktleak/kkt.hpp"
#include "kktleak/membership.hpp"
#include "kktleak/model_io.hpp"
#include "kktleak/piecewise.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace kktleak {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string timestamp_line(const std::string& what) {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return fmt::format("# kktleak {} generated {}\n", what, buf);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (const double x : xs) sum += x;
  r.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

void read_train_config(const FlatConfig& f, TrainConfig& t) {
  t.loss_kind = parse_loss_kind(f.get_string("train.loss", to_string(t.loss_kind)));
  t.init_scale = f.get_double("train.init_scale", t.init_scale);
  t.learning_rate = f.get_double("train.learning_rate", t.learning_rate);
  t.lr_growth = f.get_double("train.lr_growth", t.lr_growth);
  t.growth_cap_loss = f.get_double("train.growth_cap_loss", t.growth_cap_loss);
  t.max_steps = f.get_int("train.max_steps", t.max_steps);
  t.loss_target = f.get_double("train.loss_target", t.loss_target);
  t.kkt_residual_target = f.get_double("train.kkt_residual_target", t.kkt_residual_target);
  t.checkpoint_every = f.get_int("train.checkpoint_every", t.checkpoint_every);
  t.support_slack = f.get_double("train.support_slack", t.support_slack);
  t.backtracking = f.get_bool("train.backtracking", t.backtracking);
  t.reject_tolerance = f.get_double("train.reject_tolerance", t.reject_tolerance);
  t.min_learning_rate = f.get_double("train.min_learning_rate", t.min_learning_rate);
  t.max_relative_step = f.get_double("train.max_relative_step", t.max_relative_step);
  t.max_init_attempts =
      static_cast<int>(f.get_int("train.max_init_attempts", t.max_init_attempts));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t d, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ d) ^ stream);
}

void ExperimentConfig::validate() const {
  if (experiment != "margin" && experiment != "reconstruct") {
    throw InvalidInput("experiment must be 'margin' or 'reconstruct'");
  }
  if (dims.empty()) throw InvalidInput("dims must be nonempty");
  for (const Index d : dims) {
    if (d < 1) throw InvalidInput("every dimension must be >= 1");
  }
  if (width < 1 || n_train < 1) throw InvalidInput("width and n_train must be >= 1");
  if (experiment == "margin" && n_test < 1) throw InvalidInput("n_test must be >= 1");
  if (seeds.empty()) throw InvalidInput("seeds must be nonempty");
  if (!(margin_slack >= 0.0 && margin_slack < 1.0)) {
    throw InvalidInput("margin_slack must lie in [0, 1)");
  }
  if (!(data_low < data_high)) throw InvalidInput("data_low must be below data_high");
  if (!(match_tolerance > 0.0)) throw InvalidInput("match_tolerance must be positive");
  train.validate();
}

ExperimentConfig default_margin_config() {
  ExperimentConfig c;
  c.experiment = "margin";
  c.train.loss_kind = LossKind::exponential;
  c.train.init_scale = 1e-4;
  c.train.learning_rate = 1.0;
  c.lr_over_d = true;
  c.train.lr_growth = 1.02;
  c.train.growth_cap_loss = 1e-8;
  c.train.max_steps = 3000;
  c.train.loss_target = 1e-8;
  c.train.kkt_residual_target = 1e-2;
  c.train.checkpoint_every = 100;
  c.output_dir = "out/margin";
  return c;
}

ExperimentConfig default_reconstruct_config() {
  ExperimentConfig c;
  c.experiment = "reconstruct";
  c.dims = {1};
  c.width = 64;
  c.n_train = 6;
  c.n_test = 0;
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 25; ++s) c.seeds.push_back(s);
  c.lr_over_d = false;
  c.train.loss_kind = LossKind::exponential;
  c.train.init_scale = 0.1;
  c.train.learning_rate = 1e-2;
  c.train.lr_growth = 1.02;
  c.train.growth_cap_loss = 0.0;
  c.train.max_steps = 100000;
  c.train.loss_target = 1e-8;
  c.train.kkt_residual_target = 1e-2;
  c.train.checkpoint_every = 1000;
  c.train.reject_tolerance = 1e-2;
  c.train.min_learning_rate = 1e-2;
  c.train.max_relative_step = 0.1;
  c.output_dir = "out/reconstruct";
  return c;
}

ExperimentConfig experiment_config_from(const FlatConfig& f) {
  const std::string kind = f.get_string("experiment", "margin");
  ExperimentConfig c;
  if (kind == "margin") c = default_margin_config();
  else if (kind == "reconstruct") c = default_reconstruct_config();
  else throw ParseError("experiment must be 'margin' or 'reconstruct', got '" + kind + "'");

  std::vector<std::int64_t> dims(c.dims.begin(), c.dims.end());
  dims = f.get_int_list("dims", dims);
  c.dims.assign(dims.begin(), dims.end());
  c.width = f.get_int("width", c.width);
  c.n_train = f.get_int("n_train", c.n_train);
  c.n_test = f.get_int("n_test", c.n_test);
  if (f.has("seeds") && f.has("num_seeds")) {
    throw ParseError("give either seeds or num_seeds, not both");
  }
  if (f.has("num_seeds")) {
    const std::int64_t count = f.get_int("num_seeds", 0);
    if (count < 1) throw ParseError("num_seeds must be >= 1");
    c.seeds.clear();
    for (std::int64_t s = 0; s < count; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    std::vector<std::int64_t> seeds(c.seeds.begin(), c.seeds.end());
    seeds = f.get_int_list("seeds", seeds);
    c.seeds.clear();
    for (const std::int64_t s : seeds) {
      if (s < 0) throw ParseError("seeds must be nonnegative");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  c.margin_slack = f.get_double("margin_slack", c.margin_slack);
  c.mean_shift = f.get_double("mean_shift", c.mean_shift);
  c.lr_over_d = f.get_bool("lr_over_d", c.lr_over_d);
  read_train_config(f, c.train);
  c.data_low = f.get_double("data_low", c.data_low);
  c.data_high = f.get_double("data_high", c.data_high);
  const std::string labels = f.get_string("labels", c.labels == LabelRule::random ? "random" : "sign");
  if (labels == "random") c.labels = LabelRule::random;
  else if (labels == "sign") c.labels = LabelRule::sign;
  else throw ParseError("labels must be 'random' or 'sign'");
  c.global_neuron = f.get_bool("global_neuron", c.global_neuron);
  c.match_tolerance = f.get_double("match_tolerance", c.match_tolerance);
  c.tolerances.flatness_rel = f.get_double("tol.flatness", c.tolerances.flatness_rel);
  c.tolerances.margin_rel = f.get_double("tol.margin", c.tolerances.margin_rel);
  c.tolerances.merge_rel = f.get_double("tol.merge", c.tolerances.merge_rel);
  c.output_dir = f.get_string("output_dir", c.output_dir.string());
  f.reject_unused();
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("invalid experiment config: ") + e.what());
  }
  return c;
}

MarginRecord run_margin_cell(const ExperimentConfig& cfg, Index d, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  MarginRecord rec;
  rec.d = d;
  rec.seed = seed;

  DistributionSpec train_spec =
      DistributionSpec::two_gaussian_mixture(d, derive_seed(seed, static_cast<std::uint64_t>(d), 0));
  for (VectorXd& mu : train_spec.means) mu *= cfg.mean_shift;
  DistributionSpec test_spec = train_spec;
  test_spec.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(d), 1);
  const Sample tr = sample(train_spec, cfg.n_train);
  const Sample te = sample(test_spec, cfg.n_test);
  const LabeledDataset train_data(tr.points, label_by_component(tr.components));

  TrainConfig tc = cfg.train;
  tc.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(d), 2);
  if (cfg.lr_over_d) {
    tc.learning_rate /= static_cast<double>(d);
    tc.min_learning_rate /= static_cast<double>(d);
  }

  std::optional<TrainResult> result;
  try {
    result.emplace(train(train_data, cfg.width, tc));
  } catch (const TrainingDiverged&) {
    rec.diverged = true;
  }
  if (result) {
    try {
      const MarginInfo mi = margin(result->net, train_data);
      rec.margin = mi.m;
    } catch (const DegenerateNetwork&) {
      rec.diverged = true;
    }
  }
  if (rec.diverged) {
    rec.wall_seconds = seconds_since(start);
    return rec;
  }

  const NetworkParams& net = result->net;
  const TrainTrace& trace = result->trace;
  const double m = rec.margin;
  const double s = cfg.margin_slack;
  const VectorXd train_scores = forward_batch(net, train_data.points()).cwiseAbs();
  const VectorXd test_scores = forward_batch(net, te.points).cwiseAbs();
  Index on = 0, above = 0;
  for (Index i = 0; i < train_scores.size(); ++i) {
    on += train_scores(i) >= (1.0 - s) * m && train_scores(i) <= (1.0 + s) * m;
  }
  for (Index i = 0; i < test_scores.size(); ++i) above += test_scores(i) >= (1.0 - s) * m;
  rec.frac_train_on_margin = static_cast<double>(on) / static_cast<double>(train_scores.size());
  rec.frac_test_on_or_above_margin =
      static_cast<double>(above) / static_cast<double>(test_scores.size());
  rec.frac_test_below_margin = 1.0 - rec.frac_test_on_or_above_margin;

  rec.final_loss = loss(net, train_data, tc.loss_kind);
  rec.kkt_residual = estimate_lambdas(net, train_data, s).stationarity_residual;
  RuleParams rule;
  rule.rule = MembershipRule::known_margin;
  rule.margin = m;
  const AttackEvaluation ev = evaluate_scores(train_scores, test_scores, rule);
  rec.attack_auc = ev.auc;
  rec.attack_accuracy = ev.accuracy;
  rec.steps = trace.steps_taken;
  rec.converged = trace.converged;
  rec.reached_loss_below_inv_n = trace.reached_loss_below_inv_n;
  rec.margin_lower_ok = !(rec.final_loss < 1.0 / (2.0 * std::exp(1.0))) || m > 1.0 / std::exp(1.0);
  rec.wall_seconds = seconds_since(start);
  return rec;
}

MarginExperimentResult run_margin_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Index> dims = cfg.dims;
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  MarginExperimentResult out;
  for (const Index d : dims) {
    std::vector<double> tr, te, below, auc, acc;
    for (const std::uint64_t seed : seeds) {
      out.records.push_back(run_margin_cell(cfg, d, seed));
      const MarginRecord& r = out.records.back();
      if (r.diverged) continue;
      tr.push_back(r.frac_train_on_margin);
      te.push_back(r.frac_test_on_or_above_margin);
      below.push_back(r.frac_test_below_margin);
      auc.push_back(r.attack_auc);
      acc.push_back(r.attack_accuracy);
    }
    MarginAggregate a;
    a.d = d;
    a.cells = tr.size();
    const MeanStd mtr = mean_std(tr), mte = mean_std(te), mbe = mean_std(below);
    a.mean_train_on_margin = mtr.mean;
    a.std_train_on_margin = mtr.std;
    a.mean_test_on_or_above = mte.mean;
    a.std_test_on_or_above = mte.std;
    a.mean_test_below = mbe.mean;
    a.std_test_below = mbe.std;
    a.mean_auc = mean_std(auc).mean;
    a.mean_accuracy = mean_std(acc).mean;
    out.aggregates.push_back(a);
  }
  return out;
}

void write_margin_outputs(const ExperimentConfig& cfg, const MarginExperimentResult& result) {
  std::ostringstream res;
  res << timestamp_line("margin experiment");
  res << "kind,d,seed,cells,frac_train_on_margin,frac_test_on_or_above_margin,"
         "frac_test_below_margin,final_loss,margin,kkt_residual,attack_auc,attack_accuracy,"
         "steps,converged,reached_loss_below_inv_n,margin_lower_ok,diverged\n";
  for (const MarginRecord& r : result.records) {
    res << fmt::format("cell,{},{},1,{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.d, r.seed,
                       r.frac_train_on_margin, r.frac_test_on_or_above_margin,
                       r.frac_test_below_margin, r.final_loss, r.margin, r.kkt_residual,
                       r.attack_auc, r.attack_accuracy, r.steps, int(r.converged),
                       int(r.reached_loss_below_inv_n), int(r.margin_lower_ok),
                       int(r.diverged));
  }
  for (const MarginAggregate& a : result.aggregates) {
    res << fmt::format("mean,{},,{},{},{},{},,,,{},{},,,,,\n", a.d, a.cells,
                       a.mean_train_on_margin, a.mean_test_on_or_above, a.mean_test_below,
                       a.mean_auc, a.mean_accuracy);
    res << fmt::format("std,{},,{},{},{},{},,,,,,,,,,\n", a.d, a.cells, a.std_train_on_margin,
                       a.std_test_on_or_above, a.std_test_below);
  }
  write_text_file(cfg.output_dir / "results.csv", res.str());

  auto plot = [&](const char* name, auto mean, auto std) {
    std::ostringstream p;
    p << "x,y,y_err\n";
    for (const MarginAggregate& a : result.aggregates) {
      p << fmt::format("{},{},{}\n", a.d, mean(a), std(a));
    }
    write_text_file(cfg.output_dir / name, p.str());
  };
  plot("plot_train_on_margin.csv", [](const MarginAggregate& a) { return a.mean_train_on_margin; },
       [](const MarginAggregate& a) { return a.std_train_on_margin; });
  plot("plot_test_on_or_above_margin.csv",
       [](const MarginAggregate& a) { return a.mean_test_on_or_above; },
       [](const MarginAggregate& a) { return a.std_test_on_or_above; });
  plot("plot_test_below_margin.csv", [](const MarginAggregate& a) { return a.mean_test_below; },
       [](const MarginAggregate& a) { return a.std_test_below; });

  std::ostringstream timing;
  timing << timestamp_line("margin experiment timing");
  timing << "d,seed,wall_seconds\n";
  for (const MarginRecord& r : result.records) {
    timing << fmt::format("{},{},{:.3f}\n", r.d, r.seed, r.wall_seconds);
  }
  write_text_file(cfg.output_dir / "timing.csv", timing.str());
}

LabeledDataset reconstruction_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 1, 10));
  std::uniform_real_distribution<double> unif(cfg.data_low, cfg.data_high);
  std::bernoulli_distribution coin(0.5);
  MatrixXd x(cfg.n_train, 1);
  VectorXd y(cfg.n_train);
  for (Index i = 0; i < cfg.n_train; ++i) {
    x(i, 0) = unif(rng);
    if (cfg.labels == LabelRule::random) y(i) = coin(rng) ? 1.0 : -1.0;
    else y(i) = x(i, 0) >= 0.0 ? 1.0 : -1.0;
  }
  return LabeledDataset(std::move(x), std::move(y));
}

ReconstructionRecord run_reconstruction_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  ReconstructionRecord rec;
  rec.seed = seed;
  rec.single_point_error = std::numeric_limits<double>::quiet_NaN();
  const LabeledDataset data = reconstruction_data(cfg, seed);
  for (Index i = 0; i < data.size(); ++i) rec.train_points.push_back(data.points()(i, 0));

  TrainConfig tc = cfg.train;
  tc.rng_seed = derive_seed(seed, 1, 11);
  std::optional<TrainResult> result;
  try {
    if (cfg.global_neuron) {
      const NetworkParams base = init_small(1, cfg.width, tc.init_scale, tc.rng_seed);
      double reach = std::max(std::abs(cfg.data_low), std::abs(cfg.data_high));
      Neuron g;
      g.w = VectorXd::Constant(1, tc.init_scale);
      g.b = 2.0 * tc.init_scale * (1.0 + reach);
      g.v = tc.init_scale;
      result.emplace(train_from(data, base.with_neurons({g}), tc));
    } else {
      result.emplace(train(data, cfg.width, tc));
    }
    rec.margin = margin(result->net, data).m;
  } catch (const TrainingDiverged&) {
    rec.diverged = true;
  } catch (const DegenerateNetwork&) {
    rec.diverged = true;
  }
  if (rec.diverged) {
    rec.wall_seconds = seconds_since(start);
    return rec;
  }
  const NetworkParams& net = result->net;
  rec.final_loss = loss(net, data, tc.loss_kind);
  const KktReport report = estimate_lambdas(net, data, cfg.margin_slack);
  rec.kkt_residual = report.stationarity_residual;

  if (!(rec.margin > 0.0)) {
    // Some training point sits at Phi = 0, so there is no margin to attack.
    rec.candidates.degenerate = true;
  } else if (data.size() == 1 && net.width() == 1) {
    rec.single_point = true;
    try {
      const double x = recover_single(net, rec.margin);
      rec.single_point_error = std::abs(x - data.points()(0, 0));
      rec.candidates.points = {x};
      rec.candidates.provenance = {Provenance::crossing};
      rec.num_matched = rec.single_point_error <= cfg.match_tolerance;
      rec.matched_fraction = static_cast<double>(rec.num_matched);
    } catch (const DegenerateNetwork&) {
      rec.candidates.degenerate = true;
    }
    rec.num_breakpoints = breakpoints(net).size();
  } else {
    const PiecewiseLinear pl = to_piecewise_linear(net);
    rec.num_breakpoints = pl.breakpoints().size();
    rec.candidates = build_candidate_set(pl, rec.margin, cfg.tolerances);
    for (const double p : rec.candidates.points) {
      bool hit = false;
      for (const double t : rec.train_points) hit = hit || std::abs(p - t) <= cfg.match_tolerance;
      rec.num_matched += hit;
    }
    rec.matched_fraction = rec.candidates.points.empty()
                               ? 0.0
                               : static_cast<double>(rec.num_matched) /
                                     static_cast<double>(rec.candidates.points.size());
    rec.audit = interval_lemma_audit(pl, data, report, cfg.tolerances);
  }
  rec.success = !rec.candidates.points.empty() &&
                rec.matched_fraction >= rec.candidates.guaranteed_fraction;
  rec.wall_seconds = seconds_since(start);
  return rec;
}

std::vector<ReconstructionRecord> run_reconstruction_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<ReconstructionRecord> out;
  for (const std::uint64_t s : seeds) out.push_back(run_reconstruction_once(cfg, s));
  return out;
}

void write_reconstruction_outputs(const ExperimentConfig& cfg,
                                  const std::vector<ReconstructionRecord>& records) {
  std::ostringstream res;
  res << timestamp_line("reconstruction experiment");
  res << "kind,seed,final_loss,margin,kkt_residual,num_breakpoints,num_candidates,num_matched,"
         "matched_fraction,success,degenerate,max_window_points,flat_rule_disagreements,"
         "gap_violations,crossing_violation,single_point_error,diverged\n";
  std::size_t ok = 0, valid = 0;
  double frac_sum = 0.0;
  for (const ReconstructionRecord& r : records) {
    res << fmt::format("run,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.seed,
                       r.final_loss, r.margin, r.kkt_residual, r.num_breakpoints,
                       r.candidates.points.size(), r.num_matched, r.matched_fraction,
                       int(r.success), int(r.candidates.degenerate),
                       r.candidates.max_window_points(), r.candidates.flat_rule_disagreements(),
                       r.audit.gap_violations, int(r.audit.crossing_violation),
                       r.single_point ? fmt::format("{}", r.single_point_error) : "",
                       int(r.diverged));
    ok += r.success;
    if (!r.diverged) {
      ++valid;
      frac_sum += r.matched_fraction;
    }
  }
  const double rate = records.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(records.size());
  const double mean_frac = valid ? frac_sum / static_cast<double>(valid) : 0.0;
  res << fmt::format("summary,,,,,,,,{},{},,,,,,,\n", mean_frac, rate);
  write_text_file(cfg.output_dir / "results.csv", res.str());

  std::ostringstream plot;
  plot << "x,y,y_err\n";
  for (const ReconstructionRecord& r : records) {
    plot << fmt::format("{},{},0\n", r.seed, r.matched_fraction);
  }
  write_text_file(cfg.output_dir / "plot_matched_fraction.csv", plot.str());

  for (const ReconstructionRecord& r : records) {
    write_text_file(cfg.output_dir / fmt::format("candidates_seed{}.csv", r.seed),
                    candidates_to_csv(r.candidates));
  }
  std::ostringstream timing;
  timing << timestamp_line("reconstruction experiment timing");
  timing << "seed,wall_seconds\n";
  for (const ReconstructionRecord& r : records) {
    timing << fmt::format("{},{:.3f}\n", r.seed, r.wall_seconds);
  }
  write_text_file(cfg.output_dir / "timing.csv", timing.str());
}

}  // namespace kktleak

// kktleak command-line front end.

#include "kktleak/distributions.hpp"
#include "kktleak/error.hpp"
#include "kktleak/experiment.hpp"
#include "kktleak/kkt.hpp"
#include "kktleak/membership.hpp"
#include "kktleak/model_io.hpp"
#include "kktleak/piecewise.hpp"
#include "kktleak/reconstruct.hpp"
#include "kktleak/training.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace kktleak;

namespace {

// Raised for bad combinations of otherwise well-formed flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_output_dir() {
  if (const char* env = std::getenv("KKTLEAK_OUTPUT_DIR"); env && *env) return env;
  return "out";
}

// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

VectorXd read_scores(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<double> values;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line == "score") continue;
    }
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size() || !std::isfinite(x) || x < 0.0) {
      throw ParseError(fmt::format("bad score '{}' in {}", line, path.string()));
    }
    values.push_back(x);
  }
  if (values.empty()) throw ParseError("no scores in " + path.string());
  return Eigen::Map<VectorXd>(values.data(), static_cast<Index>(values.size()));
}

std::string verdicts_to_csv(const VectorXd& scores, const std::vector<MembershipVerdict>& vs) {
  std::ostringstream out;
  out << "point_id,score,verdict,rule,threshold\n";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    out << fmt::format("{},{},{},{},{}\n", i, scores(static_cast<Index>(i)),
                       vs[i].is_member ? 1 : 0, to_string(vs[i].rule), vs[i].threshold_used);
  }
  return out.str();
}

struct TrainArgs {
  std::string data, model_out, trace_out, output_dir;
  Index width = 64;
  std::string loss = "exponential";
  TrainConfig cfg;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train a two-layer ReLU network on a dataset CSV");
  cmd->add_option("--data", a.data, "Dataset CSV (d=<d>,n=<n> header, label last)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--width", a.width, "Hidden neurons")->capture_default_str();
  cmd->add_option("--loss", a.loss, "exponential or logistic")->capture_default_str();
  cmd->add_option("--init-scale", a.cfg.init_scale)->capture_default_str();
  cmd->add_option("--lr", a.cfg.learning_rate)->capture_default_str();
  cmd->add_option("--lr-growth", a.cfg.lr_growth)->capture_default_str();
  cmd->add_option("--growth-cap-loss", a.cfg.growth_cap_loss)->capture_default_str();
  cmd->add_option("--max-steps", a.cfg.max_steps)->capture_default_str();
  cmd->add_option("--loss-target", a.cfg.loss_target)->capture_default_str();
  cmd->add_option("--kkt-target", a.cfg.kkt_residual_target)->capture_default_str();
  cmd->add_option("--seed", a.cfg.rng_seed)->capture_default_str();
  cmd->add_option("--checkpoint-every", a.cfg.checkpoint_every)->capture_default_str();
  cmd->add_option("--reject-tolerance", a.cfg.reject_tolerance)->capture_default_str();
  cmd->add_option("--min-lr", a.cfg.min_learning_rate)->capture_default_str();
  cmd->add_option("--max-relative-step", a.cfg.max_relative_step)->capture_default_str();
  cmd->add_flag("!--no-backtracking", a.cfg.backtracking, "Fail on a non-finite loss");
  cmd->add_option("--output-dir", a.output_dir,
                  "Directory for model.json and trace.csv (default $KKTLEAK_OUTPUT_DIR or out)");
  cmd->add_option("--model-out", a.model_out, "Model path, overrides --output-dir");
  cmd->add_option("--trace-out", a.trace_out, "Trace path, overrides --output-dir");
}

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.cfg;
  cfg.loss_kind = parse_loss_kind(a.loss);
  const LabeledDataset data = read_dataset(a.data);
  const fs::path dir = a.output_dir.empty() ? default_output_dir() : fs::path(a.output_dir);
  const fs::path model_path = a.model_out.empty() ? dir / "model.json" : fs::path(a.model_out);
  const fs::path trace_path = a.trace_out.empty() ? dir / "trace.csv" : fs::path(a.trace_out);
  try {
    const TrainResult r = train(data, a.width, cfg);
    write_model(model_path, r.net);
    write_text_file(trace_path, trace_to_csv(r.trace));
    const TraceRecord& last = r.trace.records.back();
    std::cerr << fmt::format(
        "steps={} loss={:.6g} min_margin={:.6g} kkt_residual={:.3g} converged={} "
        "reached_loss_below_1_over_n={}\n",
        r.trace.steps_taken, last.loss, last.min_margin, last.kkt_residual,
        r.trace.converged, r.trace.reached_loss_below_inv_n);
  } catch (const TrainingDiverged& e) {
    write_text_file(trace_path, trace_to_csv(e.trace()));
    throw;
  }
  return 0;
}

struct KktArgs {
  std::string model, data, output, loss = "exponential";
  double slack = 0.1;
};

void add_verify(CLI::App& app, KktArgs& a) {
  auto* cmd = app.add_subcommand("verify-kkt", "Estimate dual variables and the KKT residual");
  cmd->add_option("--model", a.model)->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", a.data)->required()->check(CLI::ExistingFile);
  cmd->add_option("--slack", a.slack, "Relative support slack")->capture_default_str();
  cmd->add_option("--loss", a.loss, "Loss used for the loss-dependent diagnostics")
      ->capture_default_str();
  cmd->add_option("-o,--output", a.output, "Report path (stdout if omitted)");
}

int run_verify(const KktArgs& a) {
  const NetworkParams net = read_model(a.model);
  const LabeledDataset data = read_dataset(a.data);
  const KktReport report = analyze_kkt(net, data, a.slack, parse_loss_kind(a.loss));
  emit(a.output, kkt_report_to_json(report));
  return 0;
}

struct ReconArgs {
  std::string model, data, output;
  std::optional<double> margin;
  ToleranceConfig tol;
};

void add_reconstruct(CLI::App& attack, ReconArgs& a) {
  auto* cmd = attack.add_subcommand("reconstruct", "Candidate training points of a 1D network");
  cmd->add_option("--model", a.model)->required()->check(CLI::ExistingFile);
  auto* m = cmd->add_option("--margin", a.margin, "Margin m of the network");
  auto* d = cmd->add_option("--data", a.data, "Dataset to take m = min |Phi| from")
                ->check(CLI::ExistingFile);
  m->excludes(d);
  cmd->add_option("--flat-tol", a.tol.flatness_rel)->capture_default_str();
  cmd->add_option("--margin-tol", a.tol.margin_rel)->capture_default_str();
  cmd->add_option("--merge-tol", a.tol.merge_rel)->capture_default_str();
  cmd->add_option("-o,--output", a.output, "Candidates CSV path (stdout if omitted)");
}

int run_reconstruct(const ReconArgs& a) {
  if (!a.margin && a.data.empty()) throw UsageError("give --margin or --data");
  const NetworkParams net = read_model(a.model);
  const double m = a.margin ? *a.margin : margin(net, read_dataset(a.data)).m;
  if (net.input_dim() == 1 && net.width() == 1) {
    const double x = recover_single(net, m);
    emit(a.output, fmt::format("x,provenance\n{},single-neuron\n", x));
    return 0;
  }
  const CandidateSet set = build_candidate_set(to_piecewise_linear(net), m, a.tol);
  if (set.degenerate) std::cerr << "warning: fewer than 3 breakpoints, no candidates\n";
  emit(a.output, candidates_to_csv(set));
  return 0;
}

struct MemberArgs {
  std::string model, points, scores, members, fresh, output;
  std::string rule = "known-margin";
  std::optional<double> margin;
  double bound = RuleParams{}.bound_c;
};

void add_membership(CLI::App& attack, MemberArgs& a) {
  auto* cmd = attack.add_subcommand("membership", "Membership verdicts from network outputs");
  cmd->add_option("--rule", a.rule, "known-margin, leaked-points or bounded-margin")
      ->capture_default_str();
  cmd->add_option("--margin", a.margin, "Known margin m (known-margin rule)");
  cmd->add_option("--bound", a.bound, "Constant C (bounded-margin rule)")->capture_default_str();
  cmd->add_option("--model", a.model, "Model JSON (not needed with --scores)")
      ->check(CLI::ExistingFile);
  auto* p = cmd->add_option("--points", a.points, "Points CSV to classify")
                ->check(CLI::ExistingFile);
  auto* s = cmd->add_option("--scores", a.scores, "Precomputed |Phi| scores, one per line")
                ->check(CLI::ExistingFile);
  auto* mem = cmd->add_option("--members", a.members, "Known members, for evaluation")
                  ->check(CLI::ExistingFile);
  auto* fr = cmd->add_option("--fresh", a.fresh, "Known non-members, for evaluation")
                 ->check(CLI::ExistingFile);
  p->excludes(s);
  mem->needs(fr);
  fr->needs(mem);
  mem->excludes(p)->excludes(s);
  cmd->add_option("-o,--output", a.output, "Verdicts CSV path (stdout if omitted)");
}

int run_membership(const MemberArgs& a) {
  RuleParams params;
  params.rule = parse_membership_rule(a.rule);
  params.bound_c = a.bound;
  if (params.rule == MembershipRule::known_margin) {
    if (!a.margin) throw UsageError("the known-margin rule needs --margin");
    params.margin = *a.margin;
  }
  const bool evaluation = !a.members.empty();
  if (!evaluation && a.points.empty() && a.scores.empty()) {
    throw UsageError("give --points, --scores, or --members with --fresh");
  }
  if (a.scores.empty() && a.model.empty()) throw UsageError("--model is required");

  if (evaluation) {
    const NetworkParams net = read_model(a.model);
    const AttackEvaluation ev = evaluate_attack(net, points_from_csv(read_text_file(a.members)),
                                                points_from_csv(read_text_file(a.fresh)), params);
    emit(a.output, evaluation_to_csv(ev));
    std::cerr << fmt::format("tp={} fp={} tn={} fn={} accuracy={:.4f} tpr={:.4f} fpr={:.4f} auc={:.4f}\n",
                             ev.true_positives, ev.false_positives, ev.true_negatives,
                             ev.false_negatives, ev.accuracy, ev.true_positive_rate,
                             ev.false_positive_rate, ev.auc);
    return 0;
  }
  VectorXd scores;
  if (!a.scores.empty()) {
    scores = read_scores(a.scores);
  } else {
    const NetworkParams net = read_model(a.model);
    const MatrixXd pts = points_from_csv(read_text_file(a.points));
    scores.resize(pts.rows());
    for (Index i = 0; i < pts.rows(); ++i) scores(i) = membership_score(net, pts.row(i).transpose());
  }
  emit(a.output, verdicts_to_csv(scores, decide(scores, params)));
  return 0;
}

struct DistArgs {
  std::string kind = "uniform-sphere", points, output;
  Index d = 100, n = 30;
  std::optional<Index> n_eff;
  std::uint64_t seed = 0;
  double mean_shift = 1.0;
};

void add_check_dist(CLI::App& app, DistArgs& a) {
  auto* cmd = app.add_subcommand(
      "check-dist", "Near-orthogonality statistics of a sampled or given point set");
  cmd->add_option("--kind", a.kind, "uniform-sphere, gaussian or gaussian-mixture")
      ->capture_default_str();
  cmd->add_option("--dim", a.d)->capture_default_str();
  cmd->add_option("--n", a.n, "Points to sample")->capture_default_str();
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--mean-shift", a.mean_shift,
                  "Mixture means are +-shift e_1; a Gaussian is centred at shift e_1")
      ->capture_default_str();
  cmd->add_option("--n-eff", a.n_eff, "n used in the ratio n*delta/Delta (default: sample size)");
  cmd->add_option("--points", a.points, "Check this CSV instead of sampling")
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--output", a.output, "Report path (stdout if omitted)");
}

int run_check_dist(const DistArgs& a) {
  MatrixXd pts;
  if (!a.points.empty()) {
    pts = points_from_csv(read_text_file(a.points));
  } else {
    DistributionSpec spec;
    spec.kind = parse_distribution_kind(a.kind);
    spec.d = a.d;
    spec.rng_seed = a.seed;
    VectorXd mu = VectorXd::Zero(a.d);
    if (a.d >= 1) mu(0) = a.mean_shift;
    if (spec.kind == DistributionKind::gaussian) {
      spec.means = {mu};
    } else if (spec.kind == DistributionKind::gaussian_mixture) {
      spec.means = {mu, -mu};
      spec.mixture_weights = {0.5, 0.5};
    }
    pts = sample(spec, a.n).points;
  }
  emit(a.output, assumption_report_to_json(check_assumption(pts, a.n_eff.value_or(pts.rows()))));
  return 0;
}

struct ExperimentArgs {
  std::string kind, config, output_dir;
};

void add_experiment(CLI::App& app, ExperimentArgs& a) {
  auto* cmd = app.add_subcommand("experiment", "Run the margin or reconstruction experiment");
  cmd->add_option("kind", a.kind, "margin or reconstruct")
      ->required()
      ->check(CLI::IsMember({"margin", "reconstruct"}));
  cmd->add_option("--config", a.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", a.output_dir, "Overrides output_dir from the config");
}

int run_experiment(const ExperimentArgs& a) {
  std::string text = a.config.empty() ? std::string() : read_text_file(a.config);
  FlatConfig flat = FlatConfig::parse(text);
  const std::string named = flat.get_string("experiment", a.kind);
  if (named != a.kind) {
    throw UsageError(fmt::format("config is for experiment '{}', not '{}'", named, a.kind));
  }
  if (!flat.has("experiment")) flat = FlatConfig::parse("experiment = " + a.kind + "\n" + text);
  ExperimentConfig cfg = experiment_config_from(flat);
  if (!a.output_dir.empty()) {
    cfg.output_dir = a.output_dir;
  } else if (!flat.has("output_dir") && std::getenv("KKTLEAK_OUTPUT_DIR")) {
    cfg.output_dir = default_output_dir() / a.kind;
  }
  cfg.validate();

  if (a.kind == "margin") {
    const MarginExperimentResult res = run_margin_experiment(cfg);
    write_margin_outputs(cfg, res);
    for (const MarginAggregate& g : res.aggregates) {
      std::cerr << fmt::format(
          "d={} cells={} train_on_margin={:.3f} test_on_or_above={:.3f} test_below={:.3f} "
          "auc={:.3f}\n",
          g.d, g.cells, g.mean_train_on_margin, g.mean_test_on_or_above, g.mean_test_below,
          g.mean_auc);
    }
  } else {
    const std::vector<ReconstructionRecord> recs = run_reconstruction_pipeline(cfg);
    write_reconstruction_outputs(cfg, recs);
    std::size_t ok = 0;
    for (const ReconstructionRecord& r : recs) ok += r.success;
    std::cerr << fmt::format("runs={} successes={}\n", recs.size(), ok);
  }
  std::cerr << "wrote " << cfg.output_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy attacks on trained two-layer ReLU networks"};
  app.require_subcommand(1);

  TrainArgs train_args;
  KktArgs kkt_args;
  ReconArgs recon_args;
  MemberArgs member_args;
  DistArgs dist_args;
  ExperimentArgs exp_args;
  add_train(app, train_args);
  add_verify(app, kkt_args);
  auto* attack = app.add_subcommand("attack", "Reconstruction and membership attacks");
  attack->require_subcommand(1);
  add_reconstruct(*attack, recon_args);
  add_membership(*attack, member_args);
  add_check_dist(app, dist_args);
  add_experiment(app, exp_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("train")) return run_train(train_args);
    if (app.got_subcommand("verify-kkt")) return run_verify(kkt_args);
    if (app.got_subcommand("check-dist")) return run_check_dist(dist_args);
    if (app.got_subcommand("experiment")) return run_experiment(exp_args);
    if (attack->got_subcommand("reconstruct")) return run_reconstruct(recon_args);
    return run_membership(member_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

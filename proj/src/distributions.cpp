#include "kktleak/distributions.hpp"

#include "kktleak/error.hpp"
#include "kktleak/model_io.hpp"
#include "text_util.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace kktleak {

std::string to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::uniform_sphere: return "uniform-sphere";
    case DistributionKind::gaussian: return "gaussian";
    case DistributionKind::gaussian_mixture: return "gaussian-mixture";
  }
  return "unknown";
}

DistributionKind parse_distribution_kind(const std::string& name) {
  if (name == "uniform-sphere" || name == "sphere") return DistributionKind::uniform_sphere;
  if (name == "gaussian") return DistributionKind::gaussian;
  if (name == "gaussian-mixture" || name == "mixture") return DistributionKind::gaussian_mixture;
  throw InvalidInput("unknown distribution kind '" + name + "'");
}

void DistributionSpec::validate() const {
  if (d < 1) throw InvalidInput("distribution dimension must be >= 1");
  for (const VectorXd& mu : means) {
    if (mu.size() != d) throw InvalidInput("distribution mean has the wrong dimension");
    if (!mu.array().isFinite().all()) throw InvalidInput("distribution mean must be finite");
  }
  switch (kind) {
    case DistributionKind::uniform_sphere:
      if (!means.empty()) throw InvalidInput("the sphere distribution takes no means");
      break;
    case DistributionKind::gaussian:
      if (means.size() > 1) throw InvalidInput("a Gaussian takes at most one mean");
      break;
    case DistributionKind::gaussian_mixture: {
      if (means.empty()) throw InvalidInput("a mixture needs at least one component");
      if (mixture_weights.size() != means.size()) {
        throw InvalidInput("a mixture needs one weight per component");
      }
      double total = 0.0;
      for (const double w : mixture_weights) {
        if (!(w >= 0.0)) throw InvalidInput("mixture weights must be nonnegative");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("mixture weights must sum to 1");
      break;
    }
  }
}

DistributionSpec DistributionSpec::two_gaussian_mixture(Index d, std::uint64_t seed) {
  DistributionSpec spec;
  spec.kind = DistributionKind::gaussian_mixture;
  spec.d = d;
  VectorXd plus = VectorXd::Zero(d);
  plus(0) = 1.0;
  spec.means = {plus, -plus};
  spec.mixture_weights = {0.5, 0.5};
  spec.rng_seed = seed;
  return spec;
}

Sample sample(const DistributionSpec& spec, Index n) {
  spec.validate();
  if (n < 1) throw InvalidInput("sample size must be >= 1");
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<int> pick(spec.mixture_weights.begin(),
                                       spec.mixture_weights.end());
  const Index d = spec.d;
  const double radius = std::sqrt(static_cast<double>(d));

  Sample out;
  out.points.resize(n, d);
  out.components.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    int comp = 0;
    if (spec.kind == DistributionKind::gaussian_mixture) comp = pick(rng);
    VectorXd x(d);
    for (Index c = 0; c < d; ++c) x(c) = normal(rng);
    switch (spec.kind) {
      case DistributionKind::uniform_sphere: {
        const double norm = x.norm();
        if (norm == 0.0) throw Error("sphere sampler drew a zero vector");
        x *= radius / norm;
        break;
      }
      case DistributionKind::gaussian:
        if (!spec.means.empty()) x += spec.means.front();
        break;
      case DistributionKind::gaussian_mixture:
        x += spec.means[static_cast<std::size_t>(comp)];
        break;
    }
    out.points.row(i) = x.transpose();
    out.components[static_cast<std::size_t>(i)] = comp;
  }
  return out;
}

VectorXd label_by_component(const std::vector<int>& assignments, int num_components) {
  if (num_components > 2) {
    throw InvalidInput("labels from components need at most 2 components; label explicitly");
  }
  VectorXd y(static_cast<Index>(assignments.size()));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int a = assignments[i];
    if (a != 0 && a != 1) {
      throw InvalidInput("component " + std::to_string(a) +
                         " cannot be labelled; only components 0 and 1 map to labels");
    }
    y(static_cast<Index>(i)) = a == 0 ? 1.0 : -1.0;
  }
  return y;
}

AssumptionReport check_assumption(const MatrixXd& points, Index n_effective) {
  const Index n = points.rows();
  if (n < 2) throw InvalidInput("assumption check needs at least 2 points");
  if (n_effective < 1) throw InvalidInput("n_effective must be >= 1");
  const double d = static_cast<double>(points.cols());
  const MatrixXd gram = points * points.transpose();

  AssumptionReport r;
  r.n = n_effective;
  r.pairwise_threshold = std::pow(d, 0.75);
  r.norm_threshold = d / 2.0;
  r.Delta = gram.diagonal().minCoeff();
  Index pair_violations = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double a = std::abs(gram(i, j));
      r.delta = std::max(r.delta, a);
      if (a > r.pairwise_threshold) ++pair_violations;
    }
  }
  Index norm_violations = 0;
  for (Index i = 0; i < n; ++i) norm_violations += gram(i, i) < r.norm_threshold;
  r.ratio = r.Delta > 0.0 ? static_cast<double>(n_effective) * r.delta / r.Delta
                          : std::numeric_limits<double>::infinity();
  r.empirical_tau_pairwise =
      static_cast<double>(pair_violations) / (0.5 * static_cast<double>(n * (n - 1)));
  r.empirical_tau_norm = static_cast<double>(norm_violations) / static_cast<double>(n);
  return r;
}

std::string assumption_report_to_json(const AssumptionReport& r) {
  auto num = [](double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  nlohmann::json doc = {{"format_version", 1},
                        {"n", r.n},
                        {"delta", num(r.delta)},
                        {"Delta", num(r.Delta)},
                        {"ratio", num(r.ratio)},
                        {"pairwise_threshold", num(r.pairwise_threshold)},
                        {"norm_threshold", num(r.norm_threshold)},
                        {"empirical_tau_pairwise", num(r.empirical_tau_pairwise)},
                        {"empirical_tau_norm", num(r.empirical_tau_norm)}};
  return doc.dump(2) + "\n";
}

std::string dataset_to_csv(const LabeledDataset& data) {
  std::ostringstream out;
  out << fmt::format("d={},n={}\n", data.dim(), data.size());
  for (Index i = 0; i < data.size(); ++i) {
    for (Index c = 0; c < data.dim(); ++c) out << fmt::format("{},", data.points()(i, c));
    out << fmt::format("{}\n", data.labels()(i));
  }
  return out.str();
}

namespace {

struct ParsedTable {
  Index d = 0;
  MatrixXd points;
  VectorXd labels;
  bool has_labels = false;
};

ParsedTable parse_table(const std::string& text, bool labels_required) {
  const std::vector<std::string> rows = detail::lines(text);
  if (rows.empty()) throw ParseError("dataset file is empty");
  Index d = -1, n = -1;
  for (const std::string& field : detail::split(rows.front(), ',')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError("dataset header must read d=<d>,n=<n>");
    const std::string key = detail::trim(field.substr(0, eq));
    const std::int64_t value = detail::parse_int(detail::trim(field.substr(eq + 1)), key);
    if (key == "d") d = value;
    else if (key == "n") n = value;
    else throw ParseError("unknown dataset header field '" + key + "'");
  }
  if (d < 1 || n < 1) throw ParseError("dataset header needs positive d and n");
  if (static_cast<Index>(rows.size()) - 1 != n) {
    throw ParseError(fmt::format("dataset header says n={} but the file has {} rows", n,
                                 rows.size() - 1));
  }
  ParsedTable t;
  t.d = d;
  t.points.resize(n, d);
  t.labels = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const std::vector<std::string> cells = detail::split(rows[static_cast<std::size_t>(i + 1)], ',');
    const auto cols = static_cast<Index>(cells.size());
    const bool labelled = cols == d + 1;
    if (!(labelled || (!labels_required && cols == d))) {
      throw ParseError(fmt::format("dataset row {} has {} columns, expected {}", i + 1, cols,
                                   labels_required ? d + 1 : d));
    }
    if (i == 0) t.has_labels = labelled;
    if (labelled != t.has_labels) throw ParseError("dataset rows disagree on the label column");
    for (Index c = 0; c < d; ++c) {
      t.points(i, c) = detail::parse_double(cells[static_cast<std::size_t>(c)], "coordinate");
    }
    if (labelled) t.labels(i) = detail::parse_double(cells.back(), "label");
  }
  return t;
}

}  // namespace

LabeledDataset dataset_from_csv(const std::string& text) {
  ParsedTable t = parse_table(text, true);
  try {
    return LabeledDataset(std::move(t.points), std::move(t.labels));
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("invalid dataset: ") + e.what());
  }
}

MatrixXd points_from_csv(const std::string& text) {
  ParsedTable t = parse_table(text, false);
  if (!t.points.array().isFinite().all()) throw ParseError("points must be finite");
  return t.points;
}

void write_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  write_text_file(path, dataset_to_csv(data));
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_csv(read_text_file(path));
}

}  // namespace kktleak

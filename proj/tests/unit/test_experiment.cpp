#include "kktleak/error.hpp"
#include "kktleak/experiment.hpp"
#include "kktleak/kkt.hpp"
#include "kktleak/model_io.hpp"
#include "kktleak/piecewise.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace kktleak;

namespace {

ExperimentConfig small_margin_config(const std::filesystem::path& out) {
  ExperimentConfig c = default_margin_config();
  c.dims = {3, 8};
  c.width = 20;
  c.n_train = 6;
  c.n_test = 50;
  c.seeds = {0, 1};
  c.train.max_steps = 400;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("derive_seed is deterministic and separates streams") {
  CHECK(derive_seed(3, 20, 1) == derive_seed(3, 20, 1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (std::uint64_t d : {5u, 20u, 100u}) {
      for (std::uint64_t stream = 0; stream < 3; ++stream) seen.insert(derive_seed(s, d, stream));
    }
  }
  CHECK(seen.size() == 90);
}

TEST_CASE("single training point always lies on the margin") {
  ExperimentConfig c = small_margin_config("unused");
  c.n_train = 1;
  const MarginRecord r = run_margin_cell(c, 4, 2);
  REQUIRE_FALSE(r.diverged);
  CHECK(r.frac_train_on_margin == 1.0);
  CHECK(r.frac_test_on_or_above_margin + r.frac_test_below_margin == doctest::Approx(1.0));
}

TEST_CASE("small margin experiment and its outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "kktleak_test_margin";
  std::filesystem::remove_all(dir);
  const ExperimentConfig c = small_margin_config(dir);
  const MarginExperimentResult res = run_margin_experiment(c);
  REQUIRE(res.records.size() == 4);
  CHECK(res.records[0].d == 3);
  CHECK(res.records[3].d == 8);
  CHECK(res.records[1].seed == 1);
  REQUIRE(res.aggregates.size() == 2);
  for (const MarginRecord& r : res.records) {
    CHECK(r.frac_train_on_margin >= 0.0);
    CHECK(r.frac_train_on_margin <= 1.0);
    CHECK(r.attack_auc >= 0.0);
    CHECK(r.attack_auc <= 1.0);
  }
  // Same cell, same numbers.
  const MarginRecord again = run_margin_cell(c, 8, 1);
  CHECK(again.frac_test_on_or_above_margin == res.records[3].frac_test_on_or_above_margin);
  CHECK(again.margin == res.records[3].margin);

  write_margin_outputs(c, res);
  for (const char* f : {"results.csv", "plot_train_on_margin.csv", "plot_test_on_or_above_margin.csv",
                        "plot_test_below_margin.csv", "timing.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const std::string plot = read_text_file(dir / "plot_train_on_margin.csv");
  CHECK(plot.find("x,y,y_err") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("symmetric two-point data is reconstructed") {
  MatrixXd x(2, 1);
  x << -1.0, 1.0;
  VectorXd y(2);
  y << 1.0, -1.0;
  const LabeledDataset data(x, y);
  const ExperimentConfig c = default_reconstruct_config();
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig tc = c.train;
    tc.max_steps = 20000;
    tc.rng_seed = seed;
    const NetworkParams net = train(data, c.width, tc).net;
    const double m = margin(net, data).m;
    const CandidateSet set = build_candidate_set(to_piecewise_linear(net), m, c.tolerances);
    bool a = false, b = false;
    for (const double p : set.points) {
      a = a || std::abs(p + 1.0) <= 1e-3;
      b = b || std::abs(p - 1.0) <= 1e-3;
    }
    hits += a && b;
  }
  CHECK(hits >= 9);
}

TEST_CASE("single point through the pipeline") {
  ExperimentConfig c = default_reconstruct_config();
  c.n_train = 1;
  c.width = 1;
  c.train.max_steps = 20000;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ReconstructionRecord r = run_reconstruction_once(c, seed);
    REQUIRE_FALSE(r.diverged);
    CHECK(r.single_point);
    CHECK(r.single_point_error < 1e-6);
    CHECK(r.success);
  }
}

TEST_CASE("reconstruction data is deterministic and in range") {
  const ExperimentConfig c = default_reconstruct_config();
  const LabeledDataset a = reconstruction_data(c, 4);
  CHECK(a.points() == reconstruction_data(c, 4).points());
  CHECK(a.size() == 6);
  CHECK(a.points().minCoeff() >= -2.0);
  CHECK(a.points().maxCoeff() <= 2.0);
}

TEST_CASE("reconstruction outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "kktleak_test_recon";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = default_reconstruct_config();
  c.seeds = {0, 1};
  c.train.max_steps = 3000;
  c.output_dir = dir;
  const auto records = run_reconstruction_pipeline(c);
  REQUIRE(records.size() == 2);
  write_reconstruction_outputs(c, records);
  CHECK(std::filesystem::exists(dir / "results.csv"));
  CHECK(std::filesystem::exists(dir / "timing.csv"));
  CHECK(std::filesystem::exists(dir / "candidates_seed0.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig c = default_margin_config();
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = default_reconstruct_config();
  c.data_low = 3.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

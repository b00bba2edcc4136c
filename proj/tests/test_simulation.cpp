#include <catch2/catch_amalgamated.hpp>

#include <dcp/csv.hpp>
#include <dcp/simulation.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <vector>

using dcp::ExperimentConfig;
using dcp::ExperimentResult;
using dcp::Method;
using dcp::RoundingMode;
using dcp::Trial;
using dcp::TrialRecord;

TEST_CASE("signal function on unit vectors and symmetry") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(12);
  x[0] = 1.0;
  CHECK(dcp::true_mean(x) == Catch::Approx(2.0 / std::sqrt(10.0)));

  x[0] = 4.0;  // 4 + 2 = 6
  CHECK(dcp::true_mean(x) == Catch::Approx(6.0 / std::sqrt(10.0)));

  // Odd in every coordinate.
  Eigen::VectorXd z(12);
  z << 0.3, -1.2, 2.0, 0.0, -0.5, 1.7, -2.2, 0.9, -0.1, 0.4, 5.0, -3.0;
  CHECK(dcp::true_mean(z) == Catch::Approx(-dcp::true_mean((-z).eval())));

  // Coordinates beyond the tenth carry no signal.
  Eigen::VectorXd w = z;
  w[10] = -7.0;
  w[11] = 11.0;
  CHECK(dcp::true_mean(w) == dcp::true_mean(z));

  Eigen::VectorXd shorty = Eigen::VectorXd::Zero(9);
  CHECK_THROWS_AS(dcp::true_mean(shorty), std::invalid_argument);
}

TEST_CASE("penalty level formula") {
  CHECK(dcp::lasso_penalty(1.0, 200, 100) ==
        Catch::Approx(std::sqrt(std::log(200.0) / 200.0)));
  CHECK(dcp::lasso_penalty(2.0, 200, 100) ==
        Catch::Approx(2.0 * std::sqrt(std::log(200.0) / 200.0)));
  CHECK_THROWS_AS(dcp::lasso_penalty(1.0, 1, 100), std::invalid_argument);
  CHECK_THROWS_AS(dcp::lasso_penalty(0.0, 200, 100), std::invalid_argument);
}

TEST_CASE("trial generation is keyed and reproducible") {
  ExperimentConfig cfg;
  cfg.n = 20;
  cfg.p = 12;
  cfg.trials = 3;

  const Trial a = dcp::generate_trial(cfg, 0);
  const Trial b = dcp::generate_trial(cfg, 0);
  CHECK(a.train.n() == 20);
  CHECK(a.train.p() == 12);
  CHECK(a.x_new.size() == 12);
  CHECK((a.train.features.array() == b.train.features.array()).all());
  CHECK((a.train.responses.array() == b.train.responses.array()).all());
  CHECK(a.y_new == b.y_new);

  const Trial c = dcp::generate_trial(cfg, 1);
  CHECK_FALSE((a.train.features.array() == c.train.features.array()).all());

  ExperimentConfig other = cfg;
  other.seed = 2;
  const Trial d = dcp::generate_trial(other, 0);
  CHECK_FALSE((a.train.features.array() == d.train.features.array()).all());
}

TEST_CASE("data-range grid spans the sample and flags degenerate ranges") {
  Eigen::VectorXd y(4);
  y << -2.0, 0.5, 3.0, 1.0;
  const dcp::GridSetup gs = dcp::data_range_grid(y, 10, RoundingMode::kNearest, 0);
  CHECK_FALSE(gs.degenerate_range);
  CHECK(gs.grid.size() == 10);
  const double step = 5.0 / 10.0;
  CHECK(gs.grid.point(0) == Catch::Approx(-2.0 + 0.5 * step));
  CHECK(gs.grid.point(9) == Catch::Approx(3.0 - 0.5 * step));
  CHECK(gs.grid.reporting_window().lo == Catch::Approx(-2.0));
  CHECK(gs.grid.reporting_window().hi == Catch::Approx(3.0));

  const dcp::GridSetup flat =
      dcp::data_range_grid(Eigen::VectorXd::Constant(5, 7.0), 4, RoundingMode::kNearest, 0);
  CHECK(flat.degenerate_range);
  CHECK(flat.grid.point(0) > 6.5);
  CHECK(flat.grid.point(3) < 7.5);
}

TEST_CASE("experiment harness bookkeeping on a small run") {
  ExperimentConfig cfg;
  cfg.n = 30;
  cfg.p = 12;
  cfg.trials = 25;
  cfg.grid_sizes = {3, 5};
  cfg.methods = dcp::all_methods();
  cfg.measure_time = false;
  cfg.threads = 1;

  const ExperimentResult res = dcp::run_experiment(cfg);
  CHECK(res.records.size() == 6u * 2u * 25u);
  CHECK(res.summary.size() == 12u);

  for (const dcp::SummaryRow& row : res.summary) {
    CHECK(row.trials_used + row.failures == 25);
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
    CHECK(row.mean_length >= 0.0);
    CHECK(row.wall_time_s == 0.0);
    if (dcp::uses_grid(row.method) && row.trials_used > 0)
      CHECK(row.mean_fit_count == Catch::Approx(static_cast<double>(row.grid_size)));
  }

  // Grid-free methods repeat the same result on every grid size.
  for (Method m : {Method::kOracle, Method::kParametric, Method::kSplit}) {
    std::vector<const TrialRecord*> at3, at5;
    for (const TrialRecord& rec : res.records) {
      if (rec.method != m) continue;
      (rec.grid_size == 3 ? at3 : at5).push_back(&rec);
    }
    REQUIRE(at3.size() == 25u);
    REQUIRE(at5.size() == 25u);
    for (std::size_t i = 0; i < at3.size(); ++i) {
      CHECK(at3[i]->trial == at5[i]->trial);
      CHECK(at3[i]->covered == at5[i]->covered);
      CHECK(at3[i]->length == at5[i]->length);
      CHECK(at3[i]->fit_count == at5[i]->fit_count);
    }
  }
}

TEST_CASE("records and summaries do not depend on the thread count") {
  ExperimentConfig cfg;
  cfg.n = 25;
  cfg.p = 11;
  cfg.trials = 12;
  cfg.grid_sizes = {4};
  cfg.methods = {Method::kOracle, Method::kApproximate, Method::kCpdd, Method::kCpdm};
  cfg.measure_time = false;

  cfg.threads = 1;
  const ExperimentResult serial = dcp::run_experiment(cfg);
  cfg.threads = 3;
  const ExperimentResult pooled = dcp::run_experiment(cfg);

  REQUIRE(serial.records.size() == pooled.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    const TrialRecord& a = serial.records[i];
    const TrialRecord& b = pooled.records[i];
    CHECK(a.method == b.method);
    CHECK(a.grid_size == b.grid_size);
    CHECK(a.trial == b.trial);
    CHECK(a.covered == b.covered);
    CHECK(a.length == b.length);
    CHECK(a.clipped == b.clipped);
    CHECK(a.fit_count == b.fit_count);
    CHECK(a.failure == b.failure);
  }

  std::ostringstream s1, s2;
  dcp::write_summary_csv(s1, serial, cfg);
  dcp::write_summary_csv(s2, pooled, cfg);
  CHECK(s1.str() == s2.str());
  std::ostringstream t1, t2;
  dcp::write_trials_csv(t1, serial);
  dcp::write_trials_csv(t2, pooled);
  CHECK(t1.str() == t2.str());
}

TEST_CASE("standard error helper, worked by hand") {
  const std::vector<double> xs = {0.0, 1.0, 1.0, 0.0, 1.0};
  // mean 0.6, sample variance 0.3, se = sqrt(0.3 / 5)
  CHECK(dcp::detail::sample_se(xs, 0.6) == Catch::Approx(std::sqrt(0.06)));
  CHECK(dcp::detail::sample_se({1.0}, 1.0) == 0.0);
}

TEST_CASE("method names round-trip and config validation bites") {
  for (Method m : dcp::all_methods()) CHECK(dcp::parse_method(dcp::method_name(m)) == m);
  CHECK_THROWS_AS(dcp::parse_method("bogus"), std::invalid_argument);

  ExperimentConfig bad;
  bad.p = 9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ExperimentConfig{};
  bad.grid_sizes = {};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ExperimentConfig{};
  bad.alpha = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pdfmidas/bootstrap.hpp"

using Catch::Approx;
using namespace pdfmidas;

namespace {

Eigen::VectorXd random_curve(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> draw(0.05, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = draw(rng);
  return v;
}

ModelSpec two_weight_spec() {
  ModelSpec spec;
  spec.kind = ModelKind::Midas;
  spec.regressors = {RegressorSpec{"g1", 3, 1, 1, TimeIndex(1, 3), WeightFamily::Almon},
                     RegressorSpec{"g2", 3, 1, 1, TimeIndex(1, 3), WeightFamily::Almon}};
  return spec;
}

//! one informative regressor, one irrelevant one, and a hidden component
//! that leaves a structural residual behind
ResolvedDesign signal_noise_design(int T, int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Grid grid(0.0, 1.0, N);
  ResolvedDesign design{grid, {}, {}, {}};
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd b1(N, 1), b2(N, 1);
    b1.col(0) = random_curve(N, rng);
    b2.col(0) = random_curve(N, rng);
    const Eigen::VectorXd hidden = random_curve(N, rng);
    design.times.push_back(TimeIndex(t + 1));
    design.targets.push_back(0.8 * b1.col(0) + 0.2 * hidden);
    design.lags.push_back({b1, b2});
  }
  return design;
}

}  // namespace

TEST_CASE("bootstrap needs enough replicates", "[bootstrap]") {
  const ModelSpec spec = two_weight_spec();
  const ResolvedDesign design = signal_noise_design(8, 6, 61);
  const FittedModel model = fit_resolved(spec, design, FitConfig{});

  BootstrapConfig config;
  config.n_replicates = 99;
  REQUIRE_THROWS_AS(bootstrap_test_resolved(model, design, config), SchemaError);
}

TEST_CASE("bootstrap reports one test per combination weight", "[bootstrap]") {
  const ModelSpec spec = two_weight_spec();
  const ResolvedDesign design = signal_noise_design(10, 8, 67);
  FitConfig fc;
  fc.seed = 2;
  const FittedModel model = fit_resolved(spec, design, fc);
  REQUIRE(model.coef.a(0) > 0.5);  // the informative weight dominates

  BootstrapConfig config;
  config.n_replicates = 100;
  config.seed = 11;
  config.fit = fc;
  const BootstrapReport report = bootstrap_test_resolved(model, design, config);

  REQUIRE(report.n_requested == 100);
  REQUIRE(report.n_effective == 100);
  REQUIRE(!report.excessive_failures);
  REQUIRE(report.tests.size() == 2);
  REQUIRE(report.tests[0].coefficient == "g1");
  REQUIRE(report.tests[1].coefficient == "g2");
  REQUIRE(report.tests[0].estimate == model.coef.a(0));
  REQUIRE(report.tests[1].estimate == model.coef.a(1));
  for (const auto& test : report.tests) {
    REQUIRE(test.replicates.size() == 100);
    REQUIRE(test.p_value >= 0.0);
    REQUIRE(test.p_value <= 1.0);
    for (const double r : test.replicates) {
      REQUIRE(r >= 0.0);
      REQUIRE(r <= 1.0 + 1e-12);
    }
  }

  SECTION("the p-value is the share of replicates at or above the estimate") {
    const auto& test = report.tests[0];
    int count = 0;
    for (const double r : test.replicates)
      if (r >= test.estimate) ++count;
    REQUIRE(test.p_value == Approx(count / 100.0).margin(1e-15));
  }

  SECTION("the same seed reproduces the report exactly") {
    const BootstrapReport again = bootstrap_test_resolved(model, design, config);
    for (std::size_t i = 0; i < report.tests.size(); ++i) {
      REQUIRE(report.tests[i].p_value == again.tests[i].p_value);
      REQUIRE(report.tests[i].replicates == again.tests[i].replicates);
    }
  }

  SECTION("the recentered two-sided variant flags a strong weight") {
    BootstrapConfig two = config;
    two.two_sided = true;
    const BootstrapReport rep2 = bootstrap_test_resolved(model, design, two);
    // no replicate can exceed twice an estimate above one half
    REQUIRE(rep2.tests[0].p_value == 0.0);
    REQUIRE(rep2.tests[1].p_value >= 0.0);
    REQUIRE(rep2.tests[1].p_value <= 1.0);
    // same replicate draws as the one-sided run, only the summary changes
    REQUIRE(rep2.tests[0].replicates == report.tests[0].replicates);
  }
}

TEST_CASE("bootstrap guards its inputs", "[bootstrap]") {
  const ModelSpec spec = two_weight_spec();
  const ResolvedDesign design = signal_noise_design(8, 6, 71);
  const FittedModel model = fit_resolved(spec, design, FitConfig{});

  BootstrapConfig config;
  config.n_replicates = 100;

  SECTION("averaging models have nothing to test") {
    FittedModel ave{ModelSpec{ModelKind::Ave, {}}, design.grid, Coefficients{}, FitDiagnostics{}};
    REQUIRE_THROWS_AS(bootstrap_test_resolved(ave, design, config), std::invalid_argument);
  }
  SECTION("the design must live on the model grid") {
    FittedModel moved = model;
    moved.grid = Grid(0.0, 2.0, design.grid.n_points);
    REQUIRE_THROWS_AS(bootstrap_test_resolved(moved, design, config), GridMismatch);
  }
}

TEST_CASE("bootstrap through a training set matches the resolved path", "[bootstrap]") {
  const Grid grid(0.0, 1.0, 6);
  std::mt19937_64 rng(73);

  ModelSpec spec;
  spec.kind = ModelKind::Midas;
  spec.regressors = {RegressorSpec{"g1", 3, 2, 1, TimeIndex(1, 3), WeightFamily::Almon}};

  TrainingSet train;
  MixedSeries series(3);
  for (TimeIndex u(0); u <= TimeIndex(9); u = u + TimeIndex(1, 3))
    series.insert(u, DensityGrid(grid, random_curve(6, rng)));
  train.regressors.emplace("g1", std::move(series));
  for (int t = 2; t <= 9; ++t)
    train.targets.emplace(TimeIndex(t), DensityGrid(grid, random_curve(6, rng)));

  FitConfig fc;
  fc.seed = 3;
  const FittedModel model = fit(spec, train, fc);

  BootstrapConfig config;
  config.n_replicates = 100;
  config.seed = 17;
  config.fit = fc;

  const BootstrapReport via_train = bootstrap_test(model, train, config);
  const BootstrapReport via_design =
      bootstrap_test_resolved(model, resolve_design(spec, train), config);
  REQUIRE(via_train.tests.size() == 1);
  REQUIRE(via_train.tests[0].p_value == via_design.tests[0].p_value);
  REQUIRE(via_train.tests[0].replicates == via_design.tests[0].replicates);
}

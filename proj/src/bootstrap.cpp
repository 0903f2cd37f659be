#include "pdfmidas/bootstrap.hpp"

#include <cmath>
#include <stdexcept>

#include "pdfmidas/rng.hpp"

namespace pdfmidas {

BootstrapReport bootstrap_test_resolved(const FittedModel& model, const ResolvedDesign& design,
                                        const BootstrapConfig& config) {
  if (config.n_replicates < 100)
    throw SchemaError("bootstrap: need at least 100 replicates, got " +
                      std::to_string(config.n_replicates));
  model.spec.validate();
  if (model.spec.kind == ModelKind::Ave)
    throw std::invalid_argument("bootstrap: averaging model has no combination weights");
  if (!(design.grid == model.grid))
    throw GridMismatch("bootstrap: design grid differs from the model grid");

  // the combination weights under test, one per Almon regressor
  std::vector<int> slots;
  for (int k = 0; k < model.spec.n_regressors(); ++k)
    if (model.spec.regressors[k].family == WeightFamily::Almon) slots.push_back(k);

  const int T = design.n_periods();
  const int N = design.grid.n_points;
  if (T == 0) throw EmptyHistory("bootstrap: no usable target period");

  // fitted densities and residuals of the original fit
  std::vector<Eigen::VectorXd> fitted(static_cast<std::size_t>(T)),
      resid(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    fitted[t] = combine(model.spec, design.lags[static_cast<std::size_t>(t)], model.coef);
    resid[t] = design.targets[static_cast<std::size_t>(t)] - fitted[t];
  }

  ResolvedDesign replicate = design;
  std::vector<std::vector<double>> draws(slots.size());
  int failures = 0;
  for (int b = 0; b < config.n_replicates; ++b) {
    // resample residuals with replacement within each period, across grid nodes
    auto engine = make_engine(child_seed(config.seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<int> pick(0, N - 1);
    for (int t = 0; t < T; ++t) {
      Eigen::VectorXd e(N);
      for (int i = 0; i < N; ++i) e(i) = resid[static_cast<std::size_t>(t)](pick(engine));
      replicate.targets[static_cast<std::size_t>(t)] = fitted[static_cast<std::size_t>(t)] + e;
    }

    FitConfig fc = config.fit;
    fc.seed = child_seed(config.seed ^ 0x517cc1b727220a95ULL, static_cast<std::uint64_t>(b));
    try {
      const FittedModel refit = fit_resolved(model.spec, replicate, fc);
      for (std::size_t s = 0; s < slots.size(); ++s)
        if (!std::isfinite(refit.coef.a(slots[s])))
          throw Error("bootstrap: replicate produced a non-finite weight");
      for (std::size_t s = 0; s < slots.size(); ++s)
        draws[s].push_back(refit.coef.a(slots[s]));
    } catch (const std::exception&) {
      ++failures;
    }
  }

  const int n_eff = config.n_replicates - failures;
  if (n_eff == 0) throw Error("bootstrap: every replicate refit failed");

  BootstrapReport report;
  report.n_requested = config.n_replicates;
  report.n_effective = n_eff;
  report.excessive_failures =
      failures > config.max_failure_share * static_cast<double>(config.n_replicates);

  for (std::size_t s = 0; s < slots.size(); ++s) {
    CoefficientTest test;
    test.coefficient = model.spec.regressors[static_cast<std::size_t>(slots[s])].series_id;
    test.estimate = model.coef.a(slots[s]);
    test.replicates = draws[s];

    if (!config.two_sided) {
      // share of replicate weights at or above the original estimate
      int count = 0;
      for (const double v : draws[s])
        if (v >= test.estimate) ++count;
      test.p_value = static_cast<double>(count) / static_cast<double>(n_eff);
    } else {
      // recenter at the estimate, double the smaller tail
      int count = 0;
      for (const double v : draws[s])
        if (v - test.estimate >= test.estimate) ++count;
      const double p1 = static_cast<double>(count) / static_cast<double>(n_eff);
      test.p_value = 2.0 * std::min(p1, 1.0 - p1);
    }
    report.tests.push_back(std::move(test));
  }
  return report;
}

BootstrapReport bootstrap_test(const FittedModel& model, const TrainingSet& train,
                               const BootstrapConfig& config) {
  return bootstrap_test_resolved(model, resolve_design(model.spec, train), config);
}

}  // namespace pdfmidas

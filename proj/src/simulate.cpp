#include "pdfmidas/simulate.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "pdfmidas/almon.hpp"
#include "pdfmidas/rng.hpp"

namespace pdfmidas {

void SimDesign::validate() const {
  if (regressors.empty())
    throw std::invalid_argument("simulation: needs at least one regressor law");
  std::set<std::string> ids;
  for (const auto& law : regressors) {
    if (law.id.empty()) throw std::invalid_argument("simulation: empty regressor id");
    if (law.id == "target")
      throw std::invalid_argument("simulation: 'target' is reserved for the response series");
    if (!ids.insert(law.id).second)
      throw std::invalid_argument("simulation: duplicate regressor id '" + law.id + "'");
    if (law.m < 1) throw std::invalid_argument("simulation: m must be >= 1");
    if (law.p < 1) throw std::invalid_argument("simulation: p must be >= 1");
    if (law.theta.size() < 1 || law.theta.size() > 4 || !law.theta.allFinite())
      throw std::invalid_argument("simulation: theta for '" + law.id +
                                  "' must hold 1..4 finite entries");
    if (!(law.variance > 0.0))
      throw std::invalid_argument("simulation: variance for '" + law.id + "' must be positive");
    if (!std::isfinite(law.drift))
      throw std::invalid_argument("simulation: drift for '" + law.id + "' must be finite");
  }
  if (a.size() != static_cast<Eigen::Index>(regressors.size()))
    throw std::invalid_argument("simulation: one combination weight per regressor required");
  if (!((a.array() > 0.0).all()) || std::abs(a.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(
        "simulation: combination weights must be positive and sum to one");
  if (periods < 1) throw std::invalid_argument("simulation: periods must be >= 1");
  if (samples_per_density < 2)
    throw std::invalid_argument("simulation: need at least two observations per density");
  if (replications < 1) throw std::invalid_argument("simulation: replications must be >= 1");
  if (grid_points < 2) throw std::invalid_argument("simulation: grid needs at least two points");
  if (!(grid_pad_sd > 0.0)) throw std::invalid_argument("simulation: grid padding must be positive");
  if (horizon < TimeIndex(0)) throw std::invalid_argument("simulation: horizon must be >= 0");
}

ModelSpec SimDesign::model_spec() const {
  ModelSpec spec;
  spec.kind = ModelKind::Midas;
  for (const auto& law : regressors)
    spec.regressors.push_back(RegressorSpec{law.id, law.m, law.p,
                                            static_cast<int>(law.theta.size()), horizon,
                                            WeightFamily::Almon});
  return spec;
}

Grid simulation_grid(const SimDesign& design) {
  design.validate();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sd_max = 0.0;
  for (const auto& law : design.regressors) {
    sd_max = std::max(sd_max, std::sqrt(law.variance));
    // curve means are linear in t and the lag index, so corners bound them
    for (const int t : {1, design.periods})
      for (const int i : {1, law.p}) {
        const double mu = law.drift * t + static_cast<double>(i) / law.m;
        lo = std::min(lo, mu);
        hi = std::max(hi, mu);
      }
  }
  return Grid(lo - design.grid_pad_sd * sd_max, hi + design.grid_pad_sd * sd_max,
              design.grid_points);
}

Eigen::VectorXd normal_pdf(const Grid& grid, double mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("normal_pdf: variance must be positive");
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  return (norm * (-0.5 / variance * (grid.points().array() - mean).square()).exp()).matrix();
}

Eigen::VectorXd sample_accept_reject(const DensityGrid& f, int n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("accept-reject: need n >= 1");
  const Eigen::VectorXd& v = f.values();
  const double f_max = v.maxCoeff();
  if (!(f_max > 0.0)) throw DegenerateSample("accept-reject: density is identically zero");

  const Grid& grid = f.grid();
  const double envelope = 1.01 * f_max;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    for (;;) {
      const double x = grid.lo + (grid.hi - grid.lo) * unif(rng);
      const double pos = (x - grid.lo) / grid.spacing();
      const auto cell = std::min(static_cast<Eigen::Index>(pos),
                                 static_cast<Eigen::Index>(grid.n_points) - 2);
      const double frac = pos - static_cast<double>(cell);
      const double fx = v(cell) + frac * (v(cell + 1) - v(cell));
      if (fx > envelope * (1.0 + 1e-12))
        throw std::logic_error("accept-reject: envelope violated");
      if (unif(rng) * envelope <= fx) {
        out(j) = x;
        break;
      }
    }
  }
  return out;
}

SimReport run_study(const SimDesign& design) {
  design.validate();
  const Grid grid = simulation_grid(design);
  const ModelSpec spec = design.model_spec();
  const int n_reg = static_cast<int>(design.regressors.size());
  const int T = design.periods;
  const int M = design.samples_per_density;
  const int N = grid.n_points;

  // exact truth, shared by all replications
  std::vector<Eigen::VectorXd> w_true(static_cast<std::size_t>(n_reg));
  for (int k = 0; k < n_reg; ++k) {
    const auto& law = design.regressors[static_cast<std::size_t>(k)];
    w_true[k] = almon_weights(AlmonSpec(static_cast<int>(law.theta.size()), law.p), law.theta);
  }

  std::vector<std::vector<std::vector<DensityGrid>>> curves(static_cast<std::size_t>(T));
  std::vector<DensityGrid> target_truth;
  target_truth.reserve(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    auto& per_reg = curves[static_cast<std::size_t>(t - 1)];
    per_reg.resize(static_cast<std::size_t>(n_reg));
    Eigen::VectorXd f = Eigen::VectorXd::Zero(N);
    for (int k = 0; k < n_reg; ++k) {
      const auto& law = design.regressors[static_cast<std::size_t>(k)];
      per_reg[k].reserve(static_cast<std::size_t>(law.p));
      for (int i = 1; i <= law.p; ++i) {
        const double mu = law.drift * t + static_cast<double>(i) / law.m;
        Eigen::VectorXd pdf = normal_pdf(grid, mu, law.variance);
        f.noalias() += design.a(k) * w_true[k](i - 1) * pdf;
        per_reg[k].emplace_back(grid, std::move(pdf));
      }
    }
    target_truth.emplace_back(grid, std::move(f));
  }

  // parameter schedule: combination weights (when more than one regressor),
  // then curve parameters regressor by regressor
  std::vector<std::string> names;
  std::vector<double> truths;
  if (n_reg >= 2)
    for (int k = 0; k < n_reg; ++k) {
      names.push_back("a[" + design.regressors[static_cast<std::size_t>(k)].id + "]");
      truths.push_back(design.a(k));
    }
  for (int k = 0; k < n_reg; ++k) {
    const auto& law = design.regressors[static_cast<std::size_t>(k)];
    for (Eigen::Index r = 0; r < law.theta.size(); ++r) {
      names.push_back("theta" + std::to_string(r + 1) + "[" + law.id + "]");
      truths.push_back(law.theta(r));
    }
  }

  std::vector<std::vector<double>> rows;
  int failures = 0;
  for (int rep = 0; rep < design.replications; ++rep) {
    auto engine = make_engine(child_seed(design.seed, static_cast<std::uint64_t>(rep)));
    try {
      ResolvedDesign resolved{grid, {}, {}, {}};
      for (int t = 1; t <= T; ++t) {
        const Eigen::VectorXd target_draws =
            sample_accept_reject(target_truth[static_cast<std::size_t>(t - 1)], M, engine);
        resolved.times.push_back(TimeIndex(t));
        resolved.targets.push_back(kde(SampleSet(target_draws), grid).renormalized().values());
        std::vector<Eigen::MatrixXd> blocks;
        blocks.reserve(static_cast<std::size_t>(n_reg));
        for (int k = 0; k < n_reg; ++k) {
          const auto& law = design.regressors[static_cast<std::size_t>(k)];
          Eigen::MatrixXd block(N, law.p);
          for (int i = 1; i <= law.p; ++i) {
            const Eigen::VectorXd lag_draws = sample_accept_reject(
                curves[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(k)]
                      [static_cast<std::size_t>(i - 1)],
                M, engine);
            block.col(i - 1) = kde(SampleSet(lag_draws), grid).renormalized().values();
          }
          blocks.push_back(std::move(block));
        }
        resolved.lags.push_back(std::move(blocks));
      }

      FitConfig fc;
      fc.seed = child_seed(design.seed,
                           static_cast<std::uint64_t>(design.replications) +
                               static_cast<std::uint64_t>(rep));
      const FittedModel model = fit_resolved(spec, resolved, fc);

      std::vector<double> row;
      row.reserve(names.size());
      if (n_reg >= 2)
        for (int k = 0; k < n_reg; ++k) row.push_back(model.coef.a(k));
      for (int k = 0; k < n_reg; ++k)
        for (Eigen::Index r = 0; r < model.coef.theta[static_cast<std::size_t>(k)].size(); ++r)
          row.push_back(model.coef.theta[static_cast<std::size_t>(k)](r));
      for (const double v : row)
        if (!std::isfinite(v)) throw Error("simulation: fit produced a non-finite estimate");
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      ++failures;
    }
  }

  if (rows.empty()) throw Error("simulation study: every replication failed");

  SimReport report;
  report.replications_requested = design.replications;
  report.replications_effective = static_cast<int>(rows.size());
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    double mean = 0.0;
    for (const auto& row : rows) mean += row[j];
    mean /= n;
    double var = 0.0, mse = 0.0;
    for (const auto& row : rows) {
      var += (row[j] - mean) * (row[j] - mean);
      mse += (row[j] - truths[j]) * (row[j] - truths[j]);
    }
    report.stats.push_back(ParamStat{names[j], truths[j], mean - truths[j],
                                     std::sqrt(var / n), std::sqrt(mse / n)});
  }
  return report;
}

SyntheticPanel make_panel(const SimDesign& design) {
  design.validate();
  for (const auto& law : design.regressors)
    if (law.m % design.horizon.den() != 0)
      throw std::invalid_argument("simulation: the horizon denominator must divide m for '" +
                                  law.id + "' so lag times land on the observation lattice");

  const int T = design.periods;

  // anchored mean of the curve observed at absolute time tau: the first
  // target period that reads it does so at some lag i* in 1..m, and the mean
  // is drift * t + i*/m for that period, matching the study law on the most
  // recent m lags and extending it consistently further back
  struct CurveLaw {
    TimeIndex at;
    double mean;
  };
  std::vector<std::vector<CurveLaw>> lattice(design.regressors.size());
  double mu_lo = std::numeric_limits<double>::infinity();
  double mu_hi = -mu_lo;
  double sd_max = 0.0;
  for (std::size_t k = 0; k < design.regressors.size(); ++k) {
    const auto& law = design.regressors[k];
    sd_max = std::max(sd_max, std::sqrt(law.variance));
    std::set<TimeIndex> times;
    for (int t = 1; t <= T; ++t)
      for (int i = 1; i <= law.p; ++i)
        times.insert(TimeIndex(t) - design.horizon - TimeIndex(i, law.m));
    for (const TimeIndex& tau : times) {
      const TimeIndex x = tau + design.horizon;  // t - i/m for the reading periods
      const std::int64_t xm = x.num() * (law.m / x.den());
      const std::int64_t rem = ((-xm) % law.m + law.m) % law.m;
      const std::int64_t i_star = rem == 0 ? law.m : rem;
      const auto t_star = static_cast<double>((xm + i_star) / law.m);
      const double mu = law.drift * t_star + static_cast<double>(i_star) / law.m;
      lattice[k].push_back(CurveLaw{tau, mu});
      mu_lo = std::min(mu_lo, mu);
      mu_hi = std::max(mu_hi, mu);
    }
  }
  const Grid grid(mu_lo - design.grid_pad_sd * sd_max, mu_hi + design.grid_pad_sd * sd_max,
                  design.grid_points);

  SyntheticPanel panel{grid, design.model_spec(), {}, {}, {}, {}};
  panel.truth.a = design.a / design.a.sum();
  panel.truth.c.resize(design.regressors.size());
  for (const auto& law : design.regressors) panel.truth.theta.push_back(law.theta);

  for (std::size_t k = 0; k < design.regressors.size(); ++k) {
    const auto& law = design.regressors[k];
    MixedSeries series(law.m);
    for (const auto& curve : lattice[k])
      series.insert(curve.at, DensityGrid(grid, normal_pdf(grid, curve.mean, law.variance)));
    panel.regressor_truth.emplace(law.id, std::move(series));
  }

  std::vector<Eigen::VectorXd> w_true(design.regressors.size());
  for (std::size_t k = 0; k < design.regressors.size(); ++k) {
    const auto& law = design.regressors[k];
    w_true[k] = almon_weights(AlmonSpec(static_cast<int>(law.theta.size()), law.p), law.theta);
  }
  for (int t = 1; t <= T; ++t) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(grid.n_points);
    for (std::size_t k = 0; k < design.regressors.size(); ++k) {
      const auto& law = design.regressors[k];
      const MixedSeries& series = panel.regressor_truth.at(law.id);
      for (int i = 1; i <= law.p; ++i) {
        const DensityGrid* g = series.find(TimeIndex(t) - design.horizon - TimeIndex(i, law.m));
        f.noalias() += panel.truth.a(static_cast<Eigen::Index>(k)) * w_true[k](i - 1) * g->values();
      }
    }
    panel.target_truth.emplace(TimeIndex(t), DensityGrid(grid, std::move(f)));
  }

  // raw draws: target periods first, then each regressor lattice in order
  auto engine = make_engine(child_seed(design.seed, 0));
  const int M = design.samples_per_density;
  auto& target_draws = panel.draws["target"];
  for (const auto& [t, f] : panel.target_truth)
    target_draws.emplace(t, sample_accept_reject(f, M, engine));
  for (const auto& law : design.regressors) {
    auto& series_draws = panel.draws[law.id];
    for (const auto& [tau, g] : panel.regressor_truth.at(law.id).entries())
      series_draws.emplace(tau, sample_accept_reject(g, M, engine));
  }
  return panel;
}

}  // namespace pdfmidas

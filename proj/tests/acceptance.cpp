// Acceptance gate: one statistical or behavioral check per criterion, each
// reported as a single PASS/FAIL line. Run with no arguments for the full
// gate, or pass criterion numbers to run a subset. Exits nonzero when any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdfmidas/almon.hpp"
#include "pdfmidas/bootstrap.hpp"
#include "pdfmidas/estimator.hpp"
#include "pdfmidas/io.hpp"
#include "pdfmidas/simulate.hpp"

namespace fs = std::filesystem;
namespace pm = pdfmidas;

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- reporting

struct Gate {
  int failures = 0;

  void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  std::string str() const {
    const auto s = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::steady_clock::now() - start_)
                       .count();
    return std::to_string(s) + " s";
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------- helpers

const pm::ParamStat& stat_named(const pm::SimReport& report, const std::string& name) {
  for (const auto& s : report.stats)
    if (s.name == name) return s;
  throw std::runtime_error("no statistic named '" + name + "' in the study report");
}

//! Univariate study design shared by the estimator-quality criteria:
//! one m = 3 regressor with a one-parameter decaying lag curve.
pm::SimDesign univariate_design(int periods, int samples, int p, int replications,
                                std::uint64_t seed) {
  pm::SimDesign design;
  pm::SimRegressorLaw law;
  law.id = "g1";
  law.m = 3;
  law.p = p;
  law.theta = Eigen::VectorXd::Constant(1, -0.05);
  law.drift = 0.01;
  law.variance = 1.0;
  design.regressors = {law};
  design.a = Eigen::VectorXd::Constant(1, 1.0);
  design.periods = periods;
  design.samples_per_density = samples;
  design.replications = replications;
  design.horizon = pm::TimeIndex(1, 3);
  design.grid_points = 30;
  design.seed = seed;
  return design;
}

pm::DensityGrid normal_curve(const pm::Grid& grid, double mean, double variance) {
  return pm::DensityGrid(grid, pm::normal_pdf(grid, mean, variance)).renormalized();
}

//! Random unit-mass curve: a two-component normal mixture with jittered
//! locations, kept strictly positive by the mixture itself.
pm::DensityGrid random_curve(const pm::Grid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mean_d(grid.lo * 0.3, grid.hi * 0.3);
  std::uniform_real_distribution<double> var_d(0.5, 2.0);
  std::uniform_real_distribution<double> mix_d(0.2, 0.8);
  const double w = mix_d(rng);
  const Eigen::VectorXd v = w * pm::normal_pdf(grid, mean_d(rng), var_d(rng)) +
                            (1.0 - w) * pm::normal_pdf(grid, mean_d(rng), var_d(rng));
  return pm::DensityGrid(grid, v).renormalized();
}

//! Exact design for solver checks: random lag blocks, targets equal to the
//! model combination at the supplied coefficients (plus optional noise).
pm::ResolvedDesign exact_design(const pm::ModelSpec& spec, const pm::Coefficients& coef,
                                const pm::Grid& grid, int periods, std::mt19937_64& rng,
                                double noise_sd = 0.0) {
  std::normal_distribution<double> noise(0.0, noise_sd);
  std::vector<pm::TimeIndex> times;
  std::vector<Eigen::VectorXd> targets;
  std::vector<std::vector<Eigen::MatrixXd>> lags;
  for (int t = 1; t <= periods; ++t) {
    std::vector<Eigen::MatrixXd> blocks;
    for (const auto& r : spec.regressors) {
      Eigen::MatrixXd block(grid.n_points, r.p);
      for (int i = 0; i < r.p; ++i) block.col(i) = random_curve(grid, rng).values();
      blocks.push_back(std::move(block));
    }
    Eigen::VectorXd y = pm::combine(spec, blocks, coef);
    if (noise_sd > 0.0)
      for (int j = 0; j < y.size(); ++j) y(j) = std::max(0.0, y(j) + noise(rng));
    times.emplace_back(t);
    targets.push_back(std::move(y));
    lags.push_back(std::move(blocks));
  }
  return pm::ResolvedDesign{grid, std::move(times), std::move(targets), std::move(lags)};
}

std::string slurp_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

double csv_metric(const fs::path& metrics_csv, const std::string& key) {
  std::ifstream in(metrics_csv);
  if (!in) throw std::runtime_error("cannot open " + metrics_csv.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma != std::string::npos && line.substr(0, comma) == key)
      return std::stod(line.substr(comma + 1));
  }
  throw std::runtime_error("no '" + key + "' row in " + metrics_csv.string());
}

int run_cli(const std::string& arguments, const fs::path& log) {
  const std::string cmd =
      std::string(PDFMIDAS_CLI_PATH) + " " + arguments + " > " + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

void write_text(const fs::path& path, const std::string& text) {
  pm::atomic_write(path, text);
}

fs::path fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ------------------------------------------------- criteria 1-4: recovery

//! Univariate curve-parameter recovery at a long sample: tight bias and
//! root-mean-square error on the decay parameter.
void criterion_1(Gate& gate) {
  Timer timer;
  const pm::SimReport report = pm::run_study(univariate_design(500, 1000, 12, 50, 2024));
  const pm::ParamStat& s = stat_named(report, "theta1[g1]");
  const bool ok = std::abs(s.bias) <= 0.004 && s.rmse <= 0.006 &&
                  report.replications_effective == report.replications_requested;
  gate.report(1, ok,
              "univariate recovery, T=500 M=1000 p=12: theta1[g1] bias " + fmt(s.bias) +
                  " (|gate| 0.004), rmse " + fmt(s.rmse) + " (gate 0.006), " +
                  std::to_string(report.replications_effective) + "/50 usable, " + timer.str());
}

//! Same law at a short sample and coarse densities: recovery stays usable.
void criterion_2(Gate& gate) {
  Timer timer;
  const pm::SimReport report = pm::run_study(univariate_design(100, 100, 3, 50, 2024));
  const pm::ParamStat& s = stat_named(report, "theta1[g1]");
  const bool ok = s.rmse <= 0.10 && report.replications_effective == report.replications_requested;
  gate.report(2, ok,
              "small-sample recovery, T=100 M=100 p=3: theta1[g1] rmse " + fmt(s.rmse) +
                  " (gate 0.10), " + timer.str());
}

//! Two-regressor recovery: combination weight and the curvature parameter of
//! the second regressor both come back tightly.
void criterion_3(Gate& gate) {
  Timer timer;
  pm::SimDesign design;
  pm::SimRegressorLaw g1;
  g1.id = "g1";
  g1.m = 3;
  g1.p = 12;
  g1.theta = Eigen::VectorXd::Constant(1, -0.05);
  g1.drift = 0.01;
  g1.variance = 1.0;
  pm::SimRegressorLaw g2;
  g2.id = "g2";
  g2.m = 3;
  g2.p = 12;
  g2.theta = (Eigen::VectorXd(2) << 0.2, -0.03).finished();
  g2.drift = 0.012;
  g2.variance = 2.0;
  design.regressors = {g1, g2};
  design.a = (Eigen::VectorXd(2) << 0.4, 0.6).finished();
  design.periods = 1000;
  design.samples_per_density = 1000;
  design.replications = 50;
  design.horizon = pm::TimeIndex(1, 3);
  design.grid_points = 30;
  design.seed = 2024;

  const pm::SimReport report = pm::run_study(design);
  const pm::ParamStat& a1 = stat_named(report, "a[g1]");
  const pm::ParamStat& t22 = stat_named(report, "theta2[g2]");
  const bool ok = a1.rmse <= 0.03 && t22.rmse <= 0.01 &&
                  report.replications_effective == report.replications_requested;
  gate.report(3, ok,
              "two-regressor recovery, T=1000 M=1000: a[g1] rmse " + fmt(a1.rmse) +
                  " (gate 0.03), theta2[g2] rmse " + fmt(t22.rmse) + " (gate 0.01), " +
                  timer.str());
}

//! Error trends: more periods shrink the error at fixed density quality, and
//! better densities never hurt at fixed periods.
void criterion_4(Gate& gate) {
  Timer timer;
  const double rmse_t100_m1000 =
      stat_named(pm::run_study(univariate_design(100, 1000, 12, 50, 2024)), "theta1[g1]").rmse;
  const double rmse_t1000_m1000 =
      stat_named(pm::run_study(univariate_design(1000, 1000, 12, 50, 2024)), "theta1[g1]").rmse;
  const double rmse_t1000_m100 =
      stat_named(pm::run_study(univariate_design(1000, 100, 12, 50, 2024)), "theta1[g1]").rmse;
  const bool ok = rmse_t1000_m1000 < rmse_t100_m1000 && rmse_t1000_m1000 <= rmse_t1000_m100;
  gate.report(4, ok,
              "error trends: rmse(T=1000,M=1000) " + fmt(rmse_t1000_m1000) + " < rmse(T=100,M=1000) " +
                  fmt(rmse_t100_m1000) + " and <= rmse(T=1000,M=100) " + fmt(rmse_t1000_m100) +
                  ", " + timer.str());
}

// ------------------------------------------------- criterion 5: properties

bool almon_simplex_property(std::string& why) {
  std::mt19937_64 rng(501);
  std::uniform_real_distribution<double> theta_d(-2.0, 2.0);
  for (int q = 1; q <= 4; ++q)
    for (int p : {1, 6, 24})
      for (int rep = 0; rep < 25; ++rep) {
        Eigen::VectorXd theta(q);
        for (int r = 0; r < q; ++r) theta(r) = theta_d(rng);
        const Eigen::VectorXd w = pm::almon_weights(pm::AlmonSpec(q, p), theta);
        if (std::abs(w.sum() - 1.0) > 1e-12 || w.minCoeff() <= 0.0) {
          why = "lag weights left the simplex at q=" + std::to_string(q) +
                " p=" + std::to_string(p);
          return false;
        }
      }
  return true;
}

bool gradient_fd_property(std::string& why) {
  std::mt19937_64 rng(502);
  std::uniform_int_distribution<int> p_d(1, 6), q_d(1, 3), k_d(1, 3);
  std::uniform_real_distribution<double> theta_d(-0.6, 0.6);
  const pm::Grid grid(-4.0, 4.0, 12);
  for (int instance = 0; instance < 100; ++instance) {
    pm::ModelSpec spec;
    const int K = k_d(rng);
    for (int k = 0; k < K; ++k) {
      pm::RegressorSpec r;
      r.series_id = "g" + std::to_string(k + 1);
      r.m = 3;
      r.p = p_d(rng);
      r.q = q_d(rng);
      r.h = pm::TimeIndex(1, 3);
      spec.regressors.push_back(r);
    }
    pm::Coefficients coef;
    Eigen::VectorXd a = Eigen::VectorXd::Ones(K);
    for (int k = 0; k < K; ++k) a(k) = 0.2 + 0.8 * std::abs(theta_d(rng));
    coef.a = a / a.sum();
    int n_theta = 0;
    for (const auto& r : spec.regressors) {
      Eigen::VectorXd th(r.q);
      for (int j = 0; j < r.q; ++j) th(j) = theta_d(rng);
      coef.theta.push_back(th);
      coef.c.emplace_back();
      n_theta += r.q;
    }
    const pm::ResolvedDesign design = exact_design(spec, coef, grid, 4, rng, 0.02);

    const Eigen::VectorXd grad = pm::objective_theta_grad(spec, design, coef);
    Eigen::VectorXd fd(n_theta);
    int flat = 0;
    const double step = 1e-6;
    for (std::size_t k = 0; k < coef.theta.size(); ++k)
      for (int j = 0; j < coef.theta[k].size(); ++j, ++flat) {
        pm::Coefficients up = coef, dn = coef;
        up.theta[k](j) += step;
        dn.theta[k](j) -= step;
        fd(flat) = (pm::objective(spec, design, up) - pm::objective(spec, design, dn)) / (2 * step);
      }
    const double err = (grad - fd).cwiseAbs().maxCoeff();
    if (err > 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff())) {
      why = "gradient/finite-difference gap " + fmt(err) + " at instance " +
            std::to_string(instance);
      return false;
    }
  }
  return true;
}

bool prediction_mass_property(std::string& why) {
  std::mt19937_64 rng(503);
  std::uniform_int_distribution<int> p_d(1, 6), q_d(1, 2), k_d(1, 2);
  std::uniform_real_distribution<double> theta_d(-0.5, 0.5);
  const pm::Grid grid(-5.0, 5.0, 24);
  for (int instance = 0; instance < 20; ++instance) {
    pm::ModelSpec spec;
    const int K = k_d(rng);
    pm::Coefficients coef;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(K);
    std::map<std::string, pm::MixedSeries> data;
    for (int k = 0; k < K; ++k) {
      pm::RegressorSpec r;
      r.series_id = "g" + std::to_string(k + 1);
      r.m = 3;
      r.p = p_d(rng);
      r.q = q_d(rng);
      r.h = pm::TimeIndex(1, 3);
      spec.regressors.push_back(r);
      Eigen::VectorXd th(r.q);
      for (int j = 0; j < r.q; ++j) th(j) = theta_d(rng);
      coef.theta.push_back(th);
      coef.c.emplace_back();
      a(k) = 0.25 + std::abs(theta_d(rng));
      pm::MixedSeries series(r.m);
      for (int i = 0; i <= 3 * r.p + 3; ++i)
        series.insert(pm::TimeIndex(10) - pm::TimeIndex(i, 3), random_curve(grid, rng));
      data.emplace(r.series_id, std::move(series));
    }
    coef.a = a / a.sum();
    pm::FittedModel model{spec, grid, coef, {}};
    const pm::Prediction pred = pm::predict(model, data, pm::TimeIndex(10));
    if (pred.clipping_applied || std::abs(pred.density.mass() - 1.0) > 1e-12) {
      why = "prediction mass " + fmt(pred.density.mass()) + " at instance " +
            std::to_string(instance);
      return false;
    }
  }
  return true;
}

bool qp_brute_force_property(std::string& why) {
  std::mt19937_64 rng(504);
  std::uniform_real_distribution<double> theta_d(-0.4, 0.4);
  const pm::Grid grid(-4.0, 4.0, 10);
  const double ds = grid.spacing();
  for (int instance = 0; instance < 20; ++instance) {
    const int K = instance < 10 ? 2 : 3;
    pm::ModelSpec spec;
    std::vector<Eigen::VectorXd> theta;
    for (int k = 0; k < K; ++k) {
      pm::RegressorSpec r;
      r.series_id = "g" + std::to_string(k + 1);
      r.m = 3;
      r.p = 2;
      r.q = 1;
      r.h = pm::TimeIndex(1, 3);
      spec.regressors.push_back(r);
      theta.push_back(Eigen::VectorXd::Constant(1, theta_d(rng)));
    }
    pm::Coefficients truth;
    truth.theta = theta;
    truth.c.resize(K);
    Eigen::VectorXd a_true = Eigen::VectorXd::Ones(K);
    for (int k = 0; k < K; ++k) a_true(k) = 0.1 + std::abs(theta_d(rng));
    truth.a = a_true / a_true.sum();
    const pm::ResolvedDesign design = exact_design(spec, truth, grid, 3, rng, 0.05);

    // combined column per regressor, then the quadratic-form coefficients
    const int T = static_cast<int>(design.times.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(K, K);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(K);
    double c0 = 0.0;
    for (int t = 0; t < T; ++t) {
      Eigen::MatrixXd cols(grid.n_points, K);
      for (int k = 0; k < K; ++k)
        cols.col(k) =
            design.lags[t][k] * pm::almon_weights(pm::AlmonSpec(1, spec.regressors[k].p), theta[k]);
      h += cols.transpose() * cols;
      g += cols.transpose() * design.targets[t];
      c0 += design.targets[t].squaredNorm();
    }
    const auto score = [&](const Eigen::VectorXd& b) {
      return ds * (b.dot(h * b) - 2.0 * g.dot(b) + c0);
    };

    const pm::CombinationSolution sol = pm::solve_a(spec, design, theta);
    if (std::abs(sol.a.sum() - 1.0) > 1e-10 || sol.a.minCoeff() < -1e-12) {
      why = "solver weights left the simplex at instance " + std::to_string(instance);
      return false;
    }
    pm::Coefficients at_sol = truth;
    at_sol.a = sol.a;
    const double q_solver = pm::objective(spec, design, at_sol);

    double q_brute = std::numeric_limits<double>::infinity();
    const int steps = 1000;
    if (K == 2) {
      for (int i = 0; i <= steps; ++i) {
        Eigen::VectorXd b(2);
        b << i / 1000.0, 1.0 - i / 1000.0;
        q_brute = std::min(q_brute, score(b));
      }
    } else {
      for (int i = 0; i <= steps; ++i)
        for (int j = 0; i + j <= steps; ++j) {
          Eigen::VectorXd b(3);
          b << i / 1000.0, j / 1000.0, 1.0 - (i + j) / 1000.0;
          q_brute = std::min(q_brute, score(b));
        }
    }
    if (q_solver > q_brute + 1e-3) {
      why = "solver objective " + fmt(q_solver) + " above brute-force " + fmt(q_brute) +
            " at instance " + std::to_string(instance);
      return false;
    }
  }
  return true;
}

bool monotone_trace_property(std::string& why) {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> theta_d(-0.4, 0.4);
  const pm::Grid grid(-4.0, 4.0, 16);
  for (int instance = 0; instance < 10; ++instance) {
    pm::ModelSpec spec;
    pm::Coefficients truth;
    Eigen::VectorXd a(2);
    a << 0.45, 0.55;
    truth.a = a;
    for (int k = 0; k < 2; ++k) {
      pm::RegressorSpec r;
      r.series_id = "g" + std::to_string(k + 1);
      r.m = 3;
      r.p = 4;
      r.q = 1;
      r.h = pm::TimeIndex(1, 3);
      spec.regressors.push_back(r);
      truth.theta.push_back(Eigen::VectorXd::Constant(1, theta_d(rng)));
      truth.c.emplace_back();
    }
    const pm::ResolvedDesign design = exact_design(spec, truth, grid, 8, rng, 0.05);
    pm::FitConfig config;
    config.seed = 505 + instance;
    const pm::FittedModel model = pm::fit_resolved(spec, design, config);
    const auto& trace = model.diagnostics.objective_trace;
    for (std::size_t i = 1; i < trace.size(); ++i)
      if (trace[i] > trace[i - 1] + 1e-9 * std::max(1.0, trace[i - 1])) {
        why = "objective rose from " + fmt(trace[i - 1]) + " to " + fmt(trace[i]) +
              " at instance " + std::to_string(instance);
        return false;
      }
  }
  return true;
}

void criterion_5(Gate& gate) {
  Timer timer;
  std::string why;
  bool ok = almon_simplex_property(why) && gradient_fd_property(why) &&
            prediction_mass_property(why) && qp_brute_force_property(why) &&
            monotone_trace_property(why);
  gate.report(5, ok,
              ok ? "solver properties: lag-weight simplex, analytic gradient, prediction mass, "
                   "brute-force weight check, monotone outer loop, " +
                       timer.str()
                 : "solver properties: " + why);
}

// --------------------------------------------- criterion 6: metric oracles

void criterion_6(Gate& gate) {
  Timer timer;
  std::string why;
  bool ok = true;

  {
    // transport distance between two shifted tophat curves equals the shift
    // up to grid resolution
    const pm::Grid grid(-1.0, 3.0, 30);
    const double ds = grid.spacing();
    Eigen::VectorXd u1 = Eigen::VectorXd::Zero(grid.n_points);
    Eigen::VectorXd u2 = Eigen::VectorXd::Zero(grid.n_points);
    for (int j = 0; j < grid.n_points; ++j) {
      const double x = grid.lo + j * ds;
      if (x >= -0.5 && x <= 0.5) u1(j) = 1.0;
      if (x >= 0.0 && x <= 1.0) u2(j) = 1.0;
    }
    const pm::DensityGrid f = pm::DensityGrid(grid, u1).renormalized();
    const pm::DensityGrid g = pm::DensityGrid(grid, u2).renormalized();
    const double w1 = pm::wasserstein1(f, g);
    if (std::abs(w1 - 0.5) > 2.0 * ds) {
      ok = false;
      why = "transport distance " + fmt(w1) + " missed the 0.5 shift by more than 2 spacings";
    }
  }

  if (ok) {
    // symmetry and identity of every distance on random curve pairs
    std::mt19937_64 rng(601);
    const pm::Grid grid(-6.0, 6.0, 41);
    for (int rep = 0; rep < 10 && ok; ++rep) {
      const pm::DensityGrid f = random_curve(grid, rng);
      const pm::DensityGrid g = random_curve(grid, rng);
      for (const auto kind : {pm::DistanceKind::L1, pm::DistanceKind::L2, pm::DistanceKind::Linf,
                              pm::DistanceKind::Hellinger}) {
        if (std::abs(pm::distance(f, g, kind) - pm::distance(g, f, kind)) > 1e-13 ||
            pm::distance(f, f, kind) != 0.0) {
          ok = false;
          why = "distance symmetry or identity failed";
          break;
        }
      }
      if (ok && (std::abs(pm::wasserstein1(f, g) - pm::wasserstein1(g, f)) > 1e-13 ||
                 pm::wasserstein1(f, f) != 0.0)) {
        ok = false;
        why = "transport symmetry or identity failed";
      }
    }
  }

  if (ok) {
    // one-sample kernel estimate reproduces the kernel itself
    const pm::Grid grid(-4.0, 4.0, 81);
    const double l = 0.7, center = 0.3;
    const pm::DensityGrid est = pm::kde(pm::SampleSet(Eigen::VectorXd::Constant(1, center)), grid, l);
    double gap = 0.0;
    for (int j = 0; j < grid.n_points; ++j) {
      const double x = grid.lo + j * grid.spacing();
      const double z = (x - center) / l;
      const double exact = std::exp(-0.5 * z * z) / (l * std::sqrt(2.0 * M_PI));
      gap = std::max(gap, std::abs(est.values()(j) - exact));
    }
    if (gap > 1e-12) {
      ok = false;
      why = "one-sample kernel estimate off by " + fmt(gap);
    }
  }

  gate.report(6, ok,
              ok ? "metric oracles: transport shift, symmetry/identity, one-sample kernel, " +
                       timer.str()
                 : "metric oracles: " + why);
}

// --------------------------------------- criterion 7: significance power

//! Design whose target is 0.8 * signal + 0.2 * hidden; the model sees the
//! signal series and an irrelevant noise series.
pm::ResolvedDesign power_design(const pm::ModelSpec& spec, const pm::Grid& grid, int periods,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  std::vector<pm::TimeIndex> times;
  std::vector<Eigen::VectorXd> targets;
  std::vector<std::vector<Eigen::MatrixXd>> lags;
  for (int t = 1; t <= periods; ++t) {
    const pm::DensityGrid signal = normal_curve(grid, -1.0 + 0.05 * t + jitter(rng), 1.0);
    const pm::DensityGrid noise = normal_curve(grid, 2.0 - 0.04 * t + jitter(rng), 1.5);
    const pm::DensityGrid hidden = normal_curve(grid, 1.0 - 0.03 * t + jitter(rng), 1.2);
    std::vector<Eigen::MatrixXd> blocks(2);
    blocks[0] = signal.values();
    blocks[1] = noise.values();
    times.emplace_back(t);
    targets.push_back(0.8 * signal.values() + 0.2 * hidden.values());
    lags.push_back(std::move(blocks));
  }
  return pm::ResolvedDesign{grid, std::move(times), std::move(targets), std::move(lags)};
}

void criterion_7(Gate& gate) {
  Timer timer;
  const pm::Grid grid(-6.0, 6.0, 30);
  pm::ModelSpec spec;
  for (const char* id : {"signal", "noise"}) {
    pm::RegressorSpec r;
    r.series_id = id;
    r.m = 1;
    r.p = 1;
    r.q = 1;
    r.h = pm::TimeIndex(0);
    spec.regressors.push_back(r);
  }

  int significant = 0;
  double min_estimate = 1.0;
  bool shapes_ok = true;
  for (int run = 0; run < 20; ++run) {
    std::mt19937_64 rng(9000 + run);
    const pm::ResolvedDesign design = power_design(spec, grid, 40, rng);
    pm::FitConfig fit_config;
    fit_config.seed = 70 + run;
    const pm::FittedModel model = pm::fit_resolved(spec, design, fit_config);
    min_estimate = std::min(min_estimate, model.coef.a(0));

    pm::BootstrapConfig config;
    config.n_replicates = 500;
    config.seed = 5000 + run;
    config.two_sided = true;
    config.fit.restarts = 0;
    const pm::BootstrapReport report = pm::bootstrap_test_resolved(model, design, config);
    if (report.tests.size() != 2 || report.tests[0].coefficient != "signal") shapes_ok = false;
    if (shapes_ok && report.tests[0].p_value <= 0.05) ++significant;
  }
  const bool ok = shapes_ok && significant >= 18 && min_estimate > 0.5;
  gate.report(7, ok,
              "significance power: signal weight flagged in " + std::to_string(significant) +
                  "/20 runs (gate >= 18), smallest estimate " + fmt(min_estimate) + ", " +
                  timer.str());
}

// ----------------------------------------- criterion 8: order selection

pm::TrainingSet kde_training_set(const pm::SyntheticPanel& panel) {
  pm::TrainingSet train;
  for (const auto& [t, draws] : panel.draws.at("target"))
    train.targets.emplace(t, pm::kde(pm::SampleSet(draws), panel.grid).renormalized());
  for (const auto& [id, series] : panel.regressor_truth) {
    pm::MixedSeries smoothed(series.m());
    for (const auto& [tau, draws] : panel.draws.at(id))
      smoothed.insert(tau, pm::kde(pm::SampleSet(draws), panel.grid).renormalized());
    train.regressors.emplace(id, std::move(smoothed));
  }
  return train;
}

void criterion_8(Gate& gate) {
  Timer timer;
  int in_window = 0;
  std::map<int, int> chosen_counts;
  for (int run = 0; run < 20; ++run) {
    pm::SimDesign design = univariate_design(60, 200, 12, 1, 7000 + run);
    design.regressors[0].drift = 0.04;
    const pm::SyntheticPanel panel = pm::make_panel(design);
    const pm::TrainingSet train = kde_training_set(panel);

    pm::ModelSpec base = panel.model;
    pm::FitConfig config;
    config.seed = 100 + run;
    const pm::OrderSelection sel = pm::select_order(base, train, 6, 16, config);
    ++chosen_counts[sel.chosen_p];
    if (sel.chosen_p >= 10 && sel.chosen_p <= 14) ++in_window;
  }
  std::string histogram;
  for (const auto& [p, n] : chosen_counts)
    histogram += " " + std::to_string(p) + "x" + std::to_string(n);
  const bool ok = in_window >= 16;
  gate.report(8, ok,
              "order selection: chosen p within [10,14] in " + std::to_string(in_window) +
                  "/20 runs (gate >= 16, true p=12, chosen" + histogram + "), " + timer.str());
}

// --------------------------------- criterion 9: tool forecast comparison

std::string grid_section(const pm::Grid& grid) {
  return "[grid]\nlo = " + pm::format_double(grid.lo) + "\nhi = " + pm::format_double(grid.hi) +
         "\nn_points = " + std::to_string(grid.n_points) + "\n";
}

void criterion_9(Gate& gate) {
  Timer timer;
  const fs::path root = fresh_dir(fs::current_path() / "acceptance_work" / "c9");
  int midas_wins = 0;
  std::string why;

  for (int run = 0; run < 20; ++run) {
    const fs::path dir = fresh_dir(root / ("run" + std::to_string(run)));
    const fs::path log = dir / "log.txt";

    write_text(dir / "sim.toml",
               "[sim]\nperiods = 40\nsamples_per_density = 200\nreplications = 1\nhorizon = \"1/3\"\n"
               "grid_points = 30\nseed = " +
                   std::to_string(3000 + run) +
                   "\n\n[sim.regressor.g1]\nm = 3\np = 6\ntheta = [-0.05]\ndrift = 0.02\n"
                   "variance = 1.0\na = 1.0\n");
    if (run_cli("simulate --config " + (dir / "sim.toml").string() + " --emit-panel --out " +
                    dir.string(),
                log) != 0) {
      why = "simulate --emit-panel failed on run " + std::to_string(run);
      break;
    }

    const pm::Grid grid = pm::read_curves_csv(dir / "truth_grids.csv").grid;
    write_text(dir / "fit_midas.toml",
               grid_section(grid) +
                   "\n[model]\nkind = \"midas\"\n\n[model.regressor.g1]\nm = 3\np = 6\nq = 1\n"
                   "h = \"1/3\"\n\n[fit]\nseed = 1\n");
    write_text(dir / "fit_ave.toml", grid_section(grid) + "\n[model]\nkind = \"ave\"\n");

    bool run_ok = true;
    for (const std::string kind : {"midas", "ave"}) {
      const fs::path sub = fresh_dir(dir / kind);
      if (run_cli("fit " + (dir / "panel.csv").string() + " --config " +
                      (dir / ("fit_" + kind + ".toml")).string() + " --out " + sub.string(),
                  log) != 0 ||
          run_cli("predict " + (sub / "model.json").string() + " " + (dir / "panel.csv").string() +
                      " --at 40 --truth " + (dir / "truth_grids.csv").string() + " --out " +
                      sub.string(),
                  log) != 0) {
        why = kind + " fit/predict failed on run " + std::to_string(run);
        run_ok = false;
        break;
      }
    }
    if (!run_ok) break;

    const double mse_midas = csv_metric(dir / "midas" / "metrics.csv", "mse");
    const double mse_ave = csv_metric(dir / "ave" / "metrics.csv", "mse");
    if (mse_midas < mse_ave) ++midas_wins;
  }

  const bool ok = why.empty() && midas_wins >= 18;
  gate.report(9, ok,
              why.empty() ? "tool round trip: restricted forecast beat the averaging baseline in " +
                                std::to_string(midas_wins) + "/20 held-out periods (gate >= 18), " +
                                timer.str()
                          : "tool round trip: " + why);
}

// ------------------------------------------- criterion 10: determinism

bool dirs_byte_identical(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<fs::path> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a))
    if (e.is_regular_file()) names_a.insert(e.path().filename());
  for (const auto& e : fs::directory_iterator(b))
    if (e.is_regular_file()) names_b.insert(e.path().filename());
  if (names_a != names_b) {
    why = "output listings differ under " + a.string();
    return false;
  }
  if (names_a.empty()) {
    why = "no outputs under " + a.string();
    return false;
  }
  for (const auto& name : names_a)
    if (slurp_file(a / name) != slurp_file(b / name)) {
      why = "byte mismatch in " + name.string();
      return false;
    }
  return true;
}

void criterion_10(Gate& gate) {
  Timer timer;
  const fs::path root = fresh_dir(fs::current_path() / "acceptance_work" / "c10");
  const fs::path log = root / "log.txt";
  std::string why;

  // shared inputs: one emitted panel plus configs for every command
  write_text(root / "sim.toml",
             "[sim]\nperiods = 12\nsamples_per_density = 60\nreplications = 2\nhorizon = \"1/3\"\n"
             "grid_points = 24\nseed = 11\n\n[sim.regressor.g1]\nm = 3\np = 3\n"
             "theta = [-0.1]\ndrift = 0.02\nvariance = 1.0\na = 1.0\n");
  const fs::path data_dir = fresh_dir(root / "data");
  if (run_cli("simulate --config " + (root / "sim.toml").string() + " --emit-panel --out " +
                  data_dir.string(),
              log) != 0) {
    gate.report(10, false, "determinism: panel emission failed");
    return;
  }
  const pm::Grid grid = pm::read_curves_csv(data_dir / "truth_grids.csv").grid;
  write_text(root / "fit.toml",
             grid_section(grid) +
                 "\n[model]\nkind = \"midas\"\n\n[model.regressor.g1]\nm = 3\np = 3\nq = 1\n"
                 "h = \"1/3\"\n\n[fit]\nseed = 5\n\n[bootstrap]\nn_replicates = 100\nseed = 9\n");
  const std::string panel = (data_dir / "panel.csv").string();
  const std::string config = (root / "fit.toml").string();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"study", "simulate --config " + (root / "sim.toml").string()},
      {"emit", "simulate --config " + (root / "sim.toml").string() + " --emit-panel"},
      {"fit", "fit " + panel + " --config " + config},
      {"select", "select-order " + panel + " --config " + config + " --p-grid 2:4"},
      {"boot", "bootstrap-test " + panel + " --config " + config},
  };

  bool ok = true;
  for (const auto& [name, base] : commands) {
    const fs::path out_a = fresh_dir(root / (name + "_a"));
    const fs::path out_b = fresh_dir(root / (name + "_b"));
    if (run_cli(base + " --out " + out_a.string(), log) != 0 ||
        run_cli(base + " --out " + out_b.string(), log) != 0) {
      ok = false;
      why = name + " run failed";
      break;
    }
    if (name == "fit" && !fs::exists(out_a / "model.json")) {
      ok = false;
      why = "fit produced no model.json";
      break;
    }
    if (!dirs_byte_identical(out_a, out_b, why)) {
      ok = false;
      why = name + ": " + why;
      break;
    }
  }

  // predict runs against the model fitted above
  if (ok) {
    const fs::path out_a = fresh_dir(root / "predict_a");
    const fs::path out_b = fresh_dir(root / "predict_b");
    const std::string base = "predict " + (root / "fit_a" / "model.json").string() + " " + panel +
                             " --at 12 --truth " + (data_dir / "truth_grids.csv").string();
    if (run_cli(base + " --out " + out_a.string(), log) != 0 ||
        run_cli(base + " --out " + out_b.string(), log) != 0) {
      ok = false;
      why = "predict run failed";
    } else if (!dirs_byte_identical(out_a, out_b, why)) {
      ok = false;
      why = "predict: " + why;
    }
  }

  gate.report(10, ok,
              ok ? "determinism: repeated fit, predict, simulate, select-order and "
                   "bootstrap-test runs are byte-identical, " +
                       timer.str()
                 : "determinism: " + why);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  const auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  Gate gate;
  try {
    if (wanted(1)) criterion_1(gate);
    if (wanted(2)) criterion_2(gate);
    if (wanted(3)) criterion_3(gate);
    if (wanted(4)) criterion_4(gate);
    if (wanted(5)) criterion_5(gate);
    if (wanted(6)) criterion_6(gate);
    if (wanted(7)) criterion_7(gate);
    if (wanted(8)) criterion_8(gate);
    if (wanted(9)) criterion_9(gate);
    if (wanted(10)) criterion_10(gate);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 2;
  }

  if (gate.failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", gate.failures);
  return 1;
}

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pdfmidas/estimator.hpp"

namespace pdfmidas {

//! Data-generating law for one regressor: at target period t, lag i is a
//! normal density with mean drift * t + i / m, so the lag position shifts the
//! location and the combination weights are identified from the shape of the
//! lag window.
struct SimRegressorLaw {
  std::string id = "g1";
  int m = 3;
  int p = 12;
  Eigen::VectorXd theta;  // true Almon parameters, 1..4 entries
  double drift = 0.01;
  double variance = 1.0;
};

struct SimDesign {
  std::vector<SimRegressorLaw> regressors;
  Eigen::VectorXd a;             // true combination weights, one per regressor
  int periods = 100;             // target periods T
  int samples_per_density = 100; // observations M behind every estimated density
  int replications = 100;
  TimeIndex horizon = TimeIndex(1, 3);
  int grid_points = 30;
  double grid_pad_sd = 4.0;  // grid extends this many max-SDs past the mean range
  std::uint64_t seed = 0;

  void validate() const;

  //! The estimation model matching this law.
  ModelSpec model_spec() const;
};

//! Evaluation grid covering every curve mean plus grid_pad_sd standard
//! deviations of padding on both sides.
Grid simulation_grid(const SimDesign& design);

//! Normal density ordinates on a grid.
Eigen::VectorXd normal_pdf(const Grid& grid, double mean, double variance);

//! Draw n observations from a gridded density: uniform proposals over the
//! grid span, accepted against the piecewise-linear interpolant with a 1%
//! envelope margin over the largest ordinate.
Eigen::VectorXd sample_accept_reject(const DensityGrid& f, int n, std::mt19937_64& rng);

struct ParamStat {
  std::string name;
  double truth;
  double bias;
  double sd;
  double rmse;
};

struct SimReport {
  std::vector<ParamStat> stats;
  int replications_requested = 0;
  int replications_effective = 0;
};

//! Estimator-quality study: for each replication, draw M observations from
//! every true lag curve and every true target density, estimate each density
//! by kernel smoothing, fit the model, and summarize bias / SD / RMSE of the
//! recovered parameters across replications (population divisor, so
//! rmse^2 = bias^2 + sd^2 holds exactly). Replications whose fit fails are
//! dropped and counted.
SimReport run_study(const SimDesign& design);

//! A consistent synthetic data set for the end-to-end pipeline: one shared
//! curve per regressor time point (keyed by exact rational time), targets
//! that are the true model combination of those curves, and raw draws from
//! every curve. Each curve anchors its mean at the first target period that
//! would read it, so the law agrees with the study design on the most recent
//! m lags and extends it consistently beyond.
struct SyntheticPanel {
  Grid grid;
  ModelSpec model;
  Coefficients truth;
  std::map<TimeIndex, DensityGrid> target_truth;
  std::map<std::string, MixedSeries> regressor_truth;
  std::map<std::string, std::map<TimeIndex, Eigen::VectorXd>> draws;  // includes "target"
};
SyntheticPanel make_panel(const SimDesign& design);

}  // namespace pdfmidas

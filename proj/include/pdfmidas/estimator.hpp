#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdfmidas/model.hpp"

namespace pdfmidas {

struct FitConfig {
  int max_outer_iterations = 50;
  double tol = 1e-8;  // relative objective decrease that counts as converged
  int bfgs_max_iterations = 200;
  double bfgs_grad_tol = 1e-7;
  int restarts = 3;             // random curve-parameter starts tried after the deterministic one
  double restart_radius = 0.5;  // restarts draw theta uniformly from [-radius, radius]
  std::uint64_t seed = 0;       // drives the restart draws, nothing else
  std::vector<Eigen::VectorXd> theta_init;  // deterministic start; empty means all zeros
};

//! Raw material for a fit: target densities and regressor histories. All
//! densities must share one grid.
struct TrainingSet {
  std::map<TimeIndex, DensityGrid> targets;
  std::map<std::string, MixedSeries> regressors;
};

//! Estimation-ready layout: for each usable target period, the target
//! ordinates and one lag block per regressor. Usable means every regressor
//! has a complete lag stack at that period.
struct ResolvedDesign {
  Grid grid;
  std::vector<TimeIndex> times;
  std::vector<Eigen::VectorXd> targets;            // [period] n_points ordinates
  std::vector<std::vector<Eigen::MatrixXd>> lags;  // [period][regressor] n_points x p_k

  int n_periods() const { return static_cast<int>(times.size()); }
};

//! Align a training set against a spec, keeping the target periods with
//! complete lag coverage. Throws EmptyHistory when no period survives.
ResolvedDesign resolve_design(const ModelSpec& spec, const TrainingSet& train);

//! Least-squares criterion: the squared target-minus-combination gap summed
//! over every period and grid node, each node carrying weight equal to the
//! grid spacing.
double objective(const ModelSpec& spec, const ResolvedDesign& design, const Coefficients& coef);

//! Analytic gradient of the criterion with respect to the stacked Almon
//! curve parameters (regressor order, q entries per Almon regressor), with
//! combination weights and unrestricted coefficients held fixed.
Eigen::VectorXd objective_theta_grad(const ModelSpec& spec, const ResolvedDesign& design,
                                     const Coefficients& coef);

//! Combination weights given fixed curve parameters. A restricted model
//! solves the simplex-constrained quadratic program exactly (active-set by
//! support enumeration); an unrestricted one imposes only the sum-to-one
//! constraint. `singular` reports a rank-deficient system solved in the
//! minimum-norm sense.
struct CombinationSolution {
  Eigen::VectorXd a;
  std::vector<Eigen::VectorXd> c;
  bool singular = false;
};
CombinationSolution solve_a(const ModelSpec& spec, const ResolvedDesign& design,
                            const std::vector<Eigen::VectorXd>& theta);

//! Curve parameters given fixed combination weights: BFGS with analytic
//! gradient and Armijo backtracking. Never returns a worse objective than the
//! starting point; `stalled` reports a line search that found no descent.
struct ThetaSolution {
  std::vector<Eigen::VectorXd> theta;
  double objective;
  int iterations = 0;
  bool stalled = false;
};
ThetaSolution solve_theta(const ModelSpec& spec, const ResolvedDesign& design,
                          const Coefficients& start, const FitConfig& config);

//! Full fit: alternate solve_a and solve_theta to convergence, from the
//! deterministic start plus `restarts` random ones, and keep the best run.
//! Throws NotIdentifiable when parameters outnumber data points.
FittedModel fit_resolved(const ModelSpec& spec, const ResolvedDesign& design,
                         const FitConfig& config = {});

//! resolve_design + fit_resolved; also handles the zero-parameter averaging
//! model, which only records the target grid.
FittedModel fit(const ModelSpec& spec, const TrainingSet& train, const FitConfig& config = {});

//! Lag-order selection by corrected in-sample criterion
//!   2 * n_parameters + n_periods * log(objective / n_periods),
//! scanned over candidate p applied to every mixed-frequency regressor
//! (regressors with m = 1 keep their own p). Ties go to the smaller p;
//! candidates whose fit fails are skipped and reported.
struct OrderCandidate {
  int p;
  double aic;
  bool ok;
  std::string note;  // failure reason when !ok
};
struct OrderSelection {
  int chosen_p;
  std::vector<OrderCandidate> candidates;
  FittedModel best;
};
OrderSelection select_order(const ModelSpec& base, const TrainingSet& train, int p_min, int p_max,
                            const FitConfig& config = {});

}  // namespace pdfmidas

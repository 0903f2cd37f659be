#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pdfmidas/density.hpp"
#include "pdfmidas/errors.hpp"
#include "pdfmidas/time_index.hpp"

namespace pdfmidas {

//! Density-valued series observed m times per unit period, keyed by exact
//! rational time. All entries share one evaluation grid.
class MixedSeries {
public:
  explicit MixedSeries(int m);

  int m() const { return m_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  //! Insert an observation. The key must sit on the 1/m lattice and the grid
  //! must match earlier entries; duplicate keys are rejected.
  void insert(TimeIndex t, DensityGrid f);

  //! Observation at exactly t, or nullptr.
  const DensityGrid* find(TimeIndex t) const;

  const std::map<TimeIndex, DensityGrid>& entries() const { return entries_; }

  //! Grid shared by all entries; nullptr while the series is empty.
  const Grid* grid() const;

private:
  int m_;
  std::map<TimeIndex, DensityGrid> entries_;
};

enum class WeightFamily { Almon, Unrestricted };

//! One regressor block of a mixed-frequency combination.
struct RegressorSpec {
  std::string series_id;
  int m = 1;                            // observations per unit period
  int p = 1;                            // number of lags in the combination
  int q = 1;                            // Almon polynomial order
  TimeIndex h = TimeIndex(0);           // forecast horizon
  WeightFamily family = WeightFamily::Almon;

  void validate() const;
};

enum class ModelKind { Midas, Umidas, Ave };

//! Forecast combination: which regressors enter and under which weight family.
struct ModelSpec {
  ModelKind kind = ModelKind::Midas;
  std::vector<RegressorSpec> regressors;

  int n_regressors() const { return static_cast<int>(regressors.size()); }

  //! Free parameters: q per Almon regressor plus its combination weight, or
  //! p lag coefficients for an unrestricted regressor.
  int parameter_count() const;

  void validate() const;
};

//! Estimated coefficients, indexed like spec.regressors. For an Almon
//! regressor entry k, theta[k] holds its q curve parameters and a(k) its
//! combination weight; c[k] is empty. For an unrestricted regressor the roles
//! swap: c[k] holds p lag coefficients, theta[k] is empty and a(k) is zero.
struct Coefficients {
  std::vector<Eigen::VectorXd> theta;
  Eigen::VectorXd a;
  std::vector<Eigen::VectorXd> c;
};

//! Shape check of coefficients against a spec; throws on mismatch.
void check_coefficients(const ModelSpec& spec, const Coefficients& coef);

struct FitDiagnostics {
  double objective = std::numeric_limits<double>::quiet_NaN();
  int outer_iterations = 0;
  bool converged = false;
  bool singular_design = false;
  bool line_search_stall = false;
  std::vector<double> objective_trace;  // objective after every half-step of the winning start
};

struct FittedModel {
  ModelSpec spec;
  Grid grid;
  Coefficients coef;
  FitDiagnostics diagnostics;
};

//! Lag stack of one regressor at target time t: column i-1 holds the
//! ordinates observed at t - h - i/m, for i = 1..p (an n_points x p matrix).
//! Throws MissingLag at the first absent position.
Eigen::MatrixXd resolve_lags(const RegressorSpec& spec, const MixedSeries& series, TimeIndex t);

//! Combination of per-regressor lag blocks under the given coefficients.
Eigen::VectorXd combine(const ModelSpec& spec, const std::vector<Eigen::MatrixXd>& blocks,
                        const Coefficients& coef);

struct Prediction {
  DensityGrid density;
  bool clipping_applied;  // negative ordinates were clipped to zero
};

//! One-step density forecast at target time t. `data` maps series id to its
//! history; every series must live on the model's grid. An averaging model
//! reads the reserved series id "target".
Prediction predict(const FittedModel& model, const std::map<std::string, MixedSeries>& data,
                   TimeIndex t);

//! Benchmark forecast: the plain average of all target densities strictly
//! before t. Throws EmptyHistory when nothing precedes t.
Prediction predict_ave(const MixedSeries& target_history, TimeIndex t);

}  // namespace pdfmidas

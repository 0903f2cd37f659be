#pragma once

#include <Eigen/Dense>

#include "pdfmidas/errors.hpp"

namespace pdfmidas {

//! Equidistant evaluation grid on [lo, hi].
struct Grid {
  double lo;
  double hi;
  int n_points;

  Grid(double lo, double hi, int n_points);

  double spacing() const { return (hi - lo) / static_cast<double>(n_points - 1); }
  Eigen::VectorXd points() const { return Eigen::VectorXd::LinSpaced(n_points, lo, hi); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.lo == b.lo && a.hi == b.hi && a.n_points == b.n_points;
  }
};

//! Trapezoid quadrature weights: (d/2, d, ..., d, d/2) with d the spacing.
Eigen::VectorXd trapezoid_weights(const Grid& grid);

//! A nonnegative function sampled on a grid — normally a probability density.
//!
//! Construction checks finiteness and sign but not unit mass: kernel
//! estimates on a too-narrow grid, or model predictions, can integrate to
//! slightly less than one. Callers that need exact mass use renormalized().
class DensityGrid {
public:
  DensityGrid(Grid grid, Eigen::VectorXd values);

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }

  //! Trapezoid-rule integral over the grid.
  double mass() const;

  bool is_normalized(double tol = 1e-6) const;

  //! Same shape scaled to unit trapezoid mass. Throws DegenerateSample when
  //! the mass is too small to divide by.
  DensityGrid renormalized() const;

private:
  Grid grid_;
  Eigen::VectorXd values_;
};

//! Raw observations backing a kernel density estimate.
struct SampleSet {
  Eigen::VectorXd values;

  explicit SampleSet(Eigen::VectorXd v);
  int size() const { return static_cast<int>(values.size()); }
};

//! Rule-of-thumb kernel bandwidth
//!   l = 0.9 * min(sd, iqr / 1.34) * M^(-1/5)
//! with the sample standard deviation on M - 1 degrees of freedom and the
//! interquartile range from linearly interpolated quantiles. Throws
//! DegenerateSample when the rule gives zero (all points equal, or fewer
//! than two observations).
double bandwidth(const SampleSet& samples);

//! Gaussian kernel density estimate of the sample evaluated on the grid:
//!   f(s) = (1 / (M l)) * sum_j phi((s - x_j) / l).
//! The returned values are the raw estimate; mass leaks off a grid that does
//! not cover the sample well, and callers decide whether to renormalize.
DensityGrid kde(const SampleSet& samples, const Grid& grid, double bandwidth);

//! kde() with the rule-of-thumb bandwidth.
DensityGrid kde(const SampleSet& samples, const Grid& grid);

enum class DistanceKind { L1, L2, Linf, Hellinger };

//! Distance between two densities on the same grid (trapezoid quadrature).
//! L2 is the root of the integrated squared difference; Hellinger is the
//! integral of (sqrt f - sqrt g)^2 without further scaling.
double distance(const DensityGrid& f, const DensityGrid& g, DistanceKind kind);

//! First Wasserstein distance via the CDF formula, W1 = integral |F - G|.
//! Both inputs are renormalized first so the CDFs reach one.
double wasserstein1(const DensityGrid& f, const DensityGrid& g);

struct MomentSummary {
  double mean;
  double sd;
  double q25;
  double median;
  double q75;
  double skewness;
  double excess_kurtosis;
};

//! Summary statistics of a density. Mass is divided out, so a mildly
//! unnormalized input yields the statistics of its normalized shape.
MomentSummary moments(const DensityGrid& f);

}  // namespace pdfmidas

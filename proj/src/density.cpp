#include "pdfmidas/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pdfmidas {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

//! Linearly interpolated quantile of a sorted sample (the convention used by
//! most statistical software for its default quantile).
double quantile_sorted(const Eigen::VectorXd& sorted, double prob) {
  const auto m = sorted.size();
  if (m == 1) return sorted(0);
  const double h = static_cast<double>(m - 1) * prob;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo >= m - 1) return sorted(m - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted(lo) + frac * (sorted(lo + 1) - sorted(lo));
}

//! Cumulative trapezoid integral of values, scaled so the last entry is one.
Eigen::VectorXd unit_cdf(const DensityGrid& f) {
  const Eigen::VectorXd& v = f.values();
  const double d = f.grid().spacing();
  Eigen::VectorXd cdf(v.size());
  cdf(0) = 0.0;
  for (Eigen::Index i = 1; i < v.size(); ++i) cdf(i) = cdf(i - 1) + 0.5 * d * (v(i) + v(i - 1));
  const double total = cdf(v.size() - 1);
  if (!(total > 0.0)) throw DegenerateSample("density has zero mass on its grid");
  return cdf / total;
}

//! Inverse of a unit CDF at probability p, linear between grid nodes.
double cdf_inverse(const Grid& grid, const Eigen::VectorXd& cdf, double p) {
  const Eigen::VectorXd s = grid.points();
  if (p <= cdf(0)) return s(0);
  for (Eigen::Index i = 1; i < cdf.size(); ++i) {
    if (cdf(i) >= p) {
      const double step = cdf(i) - cdf(i - 1);
      if (step <= 0.0) return s(i);
      return s(i - 1) + grid.spacing() * (p - cdf(i - 1)) / step;
    }
  }
  return s(s.size() - 1);
}

void check_same_grid(const DensityGrid& f, const DensityGrid& g, const char* what) {
  if (!(f.grid() == g.grid()))
    throw GridMismatch(std::string(what) + ": densities live on different grids");
}

}  // namespace

Grid::Grid(double lo, double hi, int n_points) : lo(lo), hi(hi), n_points(n_points) {
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("grid: bounds must be finite");
  if (!(lo < hi)) throw std::invalid_argument("grid: need lo < hi");
  if (n_points < 2) throw std::invalid_argument("grid: need at least two points");
}

Eigen::VectorXd trapezoid_weights(const Grid& grid) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(grid.n_points, grid.spacing());
  w(0) *= 0.5;
  w(grid.n_points - 1) *= 0.5;
  return w;
}

DensityGrid::DensityGrid(Grid grid, Eigen::VectorXd values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n_points)
    throw GridMismatch("density: " + std::to_string(values_.size()) + " values on a " +
                       std::to_string(grid_.n_points) + "-point grid");
  if (!values_.allFinite()) throw Error("density: values must be finite");
  if ((values_.array() < 0.0).any()) throw Error("density: values must be nonnegative");
}

double DensityGrid::mass() const { return trapezoid_weights(grid_).dot(values_); }

bool DensityGrid::is_normalized(double tol) const { return std::abs(mass() - 1.0) <= tol; }

DensityGrid DensityGrid::renormalized() const {
  const double m = mass();
  if (!(m > 0.0)) throw DegenerateSample("density has zero mass on its grid");
  return DensityGrid(grid_, values_ / m);
}

SampleSet::SampleSet(Eigen::VectorXd v) : values(std::move(v)) {
  if (values.size() == 0) throw std::invalid_argument("sample set: empty");
  if (!values.allFinite()) throw std::invalid_argument("sample set: non-finite observation");
}

double bandwidth(const SampleSet& samples) {
  const auto m = samples.values.size();
  if (m < 2) throw DegenerateSample("bandwidth: need at least two observations");

  Eigen::VectorXd sorted = samples.values;
  std::sort(sorted.data(), sorted.data() + m);

  const double mean = sorted.mean();
  const double sd =
      std::sqrt((sorted.array() - mean).square().sum() / static_cast<double>(m - 1));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  const double scale = std::min(sd, iqr / 1.34);
  const double bw = 0.9 * scale * std::pow(static_cast<double>(m), -0.2);
  if (!(bw > 0.0))
    throw DegenerateSample("bandwidth: sample spread is zero, bandwidth rule degenerates");
  return bw;
}

DensityGrid kde(const SampleSet& samples, const Grid& grid, double bw) {
  if (!std::isfinite(bw) || !(bw > 0.0))
    throw std::invalid_argument("kde: bandwidth must be positive and finite");
  const Eigen::ArrayXd s = grid.points().array();
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(grid.n_points);
  for (Eigen::Index j = 0; j < samples.values.size(); ++j)
    acc += (-0.5 * ((s - samples.values(j)) / bw).square()).exp();
  const double norm = kInvSqrt2Pi / (static_cast<double>(samples.values.size()) * bw);
  return DensityGrid(grid, (norm * acc).matrix());
}

DensityGrid kde(const SampleSet& samples, const Grid& grid) {
  return kde(samples, grid, bandwidth(samples));
}

double distance(const DensityGrid& f, const DensityGrid& g, DistanceKind kind) {
  check_same_grid(f, g, "distance");
  const Eigen::ArrayXd diff = f.values().array() - g.values().array();
  const Eigen::ArrayXd w = trapezoid_weights(f.grid()).array();
  switch (kind) {
    case DistanceKind::L1:
      return (w * diff.abs()).sum();
    case DistanceKind::L2:
      return std::sqrt((w * diff.square()).sum());
    case DistanceKind::Linf:
      return diff.abs().maxCoeff();
    case DistanceKind::Hellinger: {
      const Eigen::ArrayXd root_diff = f.values().array().sqrt() - g.values().array().sqrt();
      return (w * root_diff.square()).sum();
    }
  }
  throw std::logic_error("distance: unknown kind");
}

double wasserstein1(const DensityGrid& f, const DensityGrid& g) {
  check_same_grid(f, g, "wasserstein1");
  const Eigen::ArrayXd cf = unit_cdf(f).array();
  const Eigen::ArrayXd cg = unit_cdf(g).array();
  return (trapezoid_weights(f.grid()).array() * (cf - cg).abs()).sum();
}

MomentSummary moments(const DensityGrid& f) {
  const double m = f.mass();
  if (!(m > 0.0)) throw DegenerateSample("moments: density has zero mass");
  const Eigen::ArrayXd s = f.grid().points().array();
  const Eigen::ArrayXd w = trapezoid_weights(f.grid()).array() * f.values().array() / m;

  MomentSummary out{};
  out.mean = (w * s).sum();
  const Eigen::ArrayXd centered = s - out.mean;
  const double var = (w * centered.square()).sum();
  out.sd = std::sqrt(std::max(var, 0.0));
  if (out.sd > 0.0) {
    out.skewness = (w * centered.cube()).sum() / std::pow(out.sd, 3);
    out.excess_kurtosis = (w * centered.square().square()).sum() / std::pow(out.sd, 4) - 3.0;
  } else {
    out.skewness = 0.0;
    out.excess_kurtosis = 0.0;
  }

  const Eigen::VectorXd cdf = unit_cdf(f);
  out.q25 = cdf_inverse(f.grid(), cdf, 0.25);
  out.median = cdf_inverse(f.grid(), cdf, 0.50);
  out.q75 = cdf_inverse(f.grid(), cdf, 0.75);
  return out;
}

}  // namespace pdfmidas

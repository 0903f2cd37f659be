#include "pdfmidas/almon.hpp"

#include <stdexcept>
#include <string>

namespace pdfmidas {

namespace {

void check_theta(const AlmonSpec& spec, const Eigen::VectorXd& theta) {
  if (theta.size() != spec.q)
    throw std::invalid_argument("almon: theta has " + std::to_string(theta.size()) +
                                " entries, spec has q = " + std::to_string(spec.q));
  if (!theta.allFinite()) throw std::invalid_argument("almon: theta is not finite");
}

}  // namespace

AlmonSpec::AlmonSpec(int q, int p) : q(q), p(p) {
  if (q < 1 || q > 4)
    throw std::invalid_argument("almon: polynomial order q must be in 1..4, got " +
                                std::to_string(q));
  if (p < 1) throw std::invalid_argument("almon: lag count p must be >= 1, got " + std::to_string(p));
}

Eigen::MatrixXd almon_lag_powers(const AlmonSpec& spec) {
  Eigen::MatrixXd powers(spec.p, spec.q);
  for (int i = 1; i <= spec.p; ++i) {
    double v = 1.0;
    for (int r = 1; r <= spec.q; ++r) {
      v *= static_cast<double>(i);
      powers(i - 1, r - 1) = v;
    }
  }
  return powers;
}

Eigen::VectorXd almon_weights(const AlmonSpec& spec, const Eigen::VectorXd& theta) {
  check_theta(spec, theta);
  Eigen::VectorXd exponents = almon_lag_powers(spec) * theta;
  // shift so the largest exponent is 0, floor the rest at -700: exp() then
  // stays inside the normal double range and every weight is > 0
  const double shift = exponents.maxCoeff();
  Eigen::VectorXd z = (exponents.array() - shift).max(-700.0).exp();
  return z / z.sum();
}

Eigen::MatrixXd almon_weights_grad(const AlmonSpec& spec, const Eigen::VectorXd& theta) {
  const Eigen::MatrixXd powers = almon_lag_powers(spec);
  const Eigen::VectorXd w = almon_weights(spec, theta);
  const Eigen::VectorXd mu = powers.transpose() * w;  // weighted power moments
  // dw_i/dtheta_r = w_i (i^r - mu_r)
  return w.asDiagonal() * (powers.rowwise() - mu.transpose());
}

std::vector<Eigen::MatrixXd> almon_weights_hessian(const AlmonSpec& spec,
                                                   const Eigen::VectorXd& theta) {
  const Eigen::MatrixXd powers = almon_lag_powers(spec);
  const Eigen::VectorXd w = almon_weights(spec, theta);
  const Eigen::VectorXd mu = powers.transpose() * w;
  // cross moments mu_rs = sum_j w_j j^r j^s and centered powers i^r - mu_r
  const Eigen::MatrixXd cross = powers.transpose() * w.asDiagonal() * powers;
  const Eigen::MatrixXd centered = powers.rowwise() - mu.transpose();
  const Eigen::MatrixXd cov = cross - mu * mu.transpose();

  std::vector<Eigen::MatrixXd> hess(static_cast<std::size_t>(spec.p));
  for (int i = 0; i < spec.p; ++i) {
    const Eigen::VectorXd ci = centered.row(i).transpose();
    hess[static_cast<std::size_t>(i)] = w(i) * (ci * ci.transpose() - cov);
  }
  return hess;
}

}  // namespace pdfmidas

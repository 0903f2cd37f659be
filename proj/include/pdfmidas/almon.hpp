#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pdfmidas {

//! Exponential Almon lag polynomial: order q, spread over p lags.
//!
//! The weight on lag i is
//!   w_i = exp(theta_1 i + ... + theta_q i^q) / sum_j exp(theta_1 j + ... + theta_q j^q)
//! so the weights are positive and sum to one for any theta. A handful of
//! parameters shapes an arbitrarily long lag window.
struct AlmonSpec {
  int q;  // polynomial order, 1..4
  int p;  // number of lags, >= 1

  AlmonSpec(int q, int p);
};

//! Matrix of lag powers, P(i-1, r-1) = i^r for i = 1..p, r = 1..q.
Eigen::MatrixXd almon_lag_powers(const AlmonSpec& spec);

//! Weight vector w(theta), length p. Computed in log space (max subtracted
//! before exponentiation, exponents floored at -700) so no weight ever
//! underflows to zero and the sum is exactly representable.
Eigen::VectorXd almon_weights(const AlmonSpec& spec, const Eigen::VectorXd& theta);

//! Jacobian dw_i / dtheta_r, p x q. Each column sums to zero because the
//! weights sum to one identically.
Eigen::MatrixXd almon_weights_grad(const AlmonSpec& spec, const Eigen::VectorXd& theta);

//! Second derivatives: element i of the result is the q x q matrix
//! d^2 w_i / dtheta dtheta'.
std::vector<Eigen::MatrixXd> almon_weights_hessian(const AlmonSpec& spec,
                                                   const Eigen::VectorXd& theta);

}  // namespace pdfmidas

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdfmidas/estimator.hpp"

namespace pdfmidas {

struct BootstrapConfig {
  int n_replicates = 1000;         // at least 100
  std::uint64_t seed = 0;
  bool two_sided = false;          // recentered two-sided variant instead of the plain exceedance
  double max_failure_share = 0.05; // tolerated share of replicate fits that fail
  FitConfig fit;                   // settings for the replicate refits
};

//! Significance evidence for one combination weight.
struct CoefficientTest {
  std::string coefficient;  // series id the weight belongs to
  double estimate;
  double p_value;
  std::vector<double> replicates;  // the weight refitted on every surviving replicate
};

struct BootstrapReport {
  std::vector<CoefficientTest> tests;
  int n_requested = 0;
  int n_effective = 0;              // replicates whose refit succeeded
  bool excessive_failures = false;  // more than max_failure_share dropped
};

//! Residual bootstrap for the combination weights. Residuals are resampled
//! with replacement within each target period (across grid nodes), added back
//! onto the fitted densities, and the model is refitted on each synthetic
//! panel. The reported p-value is the share of replicate weights at or above
//! the original estimate; the two-sided variant recenters the replicates at
//! the estimate first and doubles the smaller tail.
BootstrapReport bootstrap_test(const FittedModel& model, const TrainingSet& train,
                               const BootstrapConfig& config);

//! Same procedure on an already-resolved design (used internally and by the
//! simulation lab).
BootstrapReport bootstrap_test_resolved(const FittedModel& model, const ResolvedDesign& design,
                                        const BootstrapConfig& config);

}  // namespace pdfmidas

#include "pdfmidas/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "pdfmidas/almon.hpp"
#include "pdfmidas/rng.hpp"

namespace pdfmidas {

namespace {

constexpr double kFeasTol = 1e-9;  // tolerated constraint slack in the QP enumeration

void check_monotone(double q_new, double q_old) {
  if (q_new > q_old + 1e-9 * (1.0 + std::abs(q_old)))
    throw std::logic_error("fit: an alternating step increased the objective");
}

//! Column layout of the combination regression: an Almon regressor
//! contributes one weighted column, an unrestricted one contributes p raw
//! lag columns.
struct ColumnLayout {
  std::vector<int> owner;  // column -> regressor index
  std::vector<int> lag;    // column -> lag within the regressor, -1 for Almon
};

ColumnLayout layout_columns(const ModelSpec& spec) {
  ColumnLayout out;
  for (int k = 0; k < spec.n_regressors(); ++k) {
    if (spec.regressors[k].family == WeightFamily::Almon) {
      out.owner.push_back(k);
      out.lag.push_back(-1);
    } else {
      for (int i = 0; i < spec.regressors[k].p; ++i) {
        out.owner.push_back(k);
        out.lag.push_back(i);
      }
    }
  }
  return out;
}

//! Exact minimizer of b'Hb - 2g'b over the unit simplex, by enumerating every
//! support and solving its equality-constrained system. Feasible for any H
//! because singleton supports always qualify.
std::pair<Eigen::VectorXd, bool> simplex_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  const int n = static_cast<int>(H.rows());
  if (n > 12) throw Error("restricted combination supports at most 12 regressors");

  Eigen::VectorXd best;
  bool best_singular = false;
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<int> support;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    support.clear();
    for (int k = 0; k < n; ++k)
      if (mask & (1u << k)) support.push_back(k);
    const int s = static_cast<int>(support.size());

    // stationarity on the support plus the sum constraint
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs(s + 1);
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) kkt(i, j) = H(support[i], support[j]);
      kkt(i, s) = kkt(s, i) = 1.0;
      rhs(i) = g(support[i]);
    }
    rhs(s) = 1.0;

    Eigen::VectorXd x;
    bool singular = false;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (lu.isInvertible()) {
      x = lu.solve(rhs);
    } else {
      x = kkt.completeOrthogonalDecomposition().solve(rhs);
      singular = true;
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    bool feasible = true;
    for (int i = 0; i < s; ++i) {
      if (x(i) < -kFeasTol) {
        feasible = false;
        break;
      }
      beta(support[i]) = std::max(x(i), 0.0);
    }
    if (!feasible) continue;
    const double total = beta.sum();
    if (!(total > 0.0)) continue;
    beta /= total;

    const double score = beta.dot(H * beta) - 2.0 * g.dot(beta);
    if (score < best_score) {
      best_score = score;
      best = beta;
      best_singular = singular;
    }
  }
  return {best, best_singular};
}

//! Minimizer of b'Hb - 2g'b subject only to sum(b) = 1.
std::pair<Eigen::VectorXd, bool> affine_ls(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  const int n = static_cast<int>(H.rows());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = H;
  kkt.col(n).head(n).setOnes();
  kkt.row(n).head(n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = g;
  rhs(n) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (lu.isInvertible()) return {lu.solve(rhs).head(n), false};
  return {kkt.completeOrthogonalDecomposition().solve(rhs).head(n).eval(), true};
}

//! Objective as a function of the stacked Almon parameters, with the
//! combination weights and any unrestricted coefficients held fixed.
class ThetaProblem {
public:
  ThetaProblem(const ModelSpec& spec, const ResolvedDesign& design, const Coefficients& coef)
      : spec_(spec), design_(design), a_(coef.a), ds_(design.grid.spacing()) {
    for (int k = 0; k < spec.n_regressors(); ++k) {
      const auto& r = spec.regressors[k];
      if (r.family == WeightFamily::Almon) {
        slots_.push_back(k);
        specs_.emplace_back(r.q, r.p);
        offsets_.push_back(dim_);
        dim_ += r.q;
      }
    }
    // the part of the residual that does not move with theta
    base_.reserve(design.times.size());
    for (std::size_t t = 0; t < design.times.size(); ++t) {
      Eigen::VectorXd b = -design.targets[t];
      for (int k = 0; k < spec.n_regressors(); ++k)
        if (spec.regressors[k].family == WeightFamily::Unrestricted)
          b.noalias() += design.lags[t][static_cast<std::size_t>(k)] * coef.c[static_cast<std::size_t>(k)];
      base_.push_back(std::move(b));
    }
  }

  int dim() const { return dim_; }

  Eigen::VectorXd flatten(const std::vector<Eigen::VectorXd>& theta) const {
    Eigen::VectorXd x(dim_);
    for (std::size_t s = 0; s < slots_.size(); ++s)
      x.segment(offsets_[s], specs_[s].q) = theta[static_cast<std::size_t>(slots_[s])];
    return x;
  }

  std::vector<Eigen::VectorXd> unflatten(const Eigen::VectorXd& x) const {
    std::vector<Eigen::VectorXd> theta(static_cast<std::size_t>(spec_.n_regressors()));
    for (std::size_t s = 0; s < slots_.size(); ++s)
      theta[static_cast<std::size_t>(slots_[s])] = x.segment(offsets_[s], specs_[s].q);
    return theta;
  }

  //! Objective value, and its gradient when `grad` is non-null.
  double eval(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const std::size_t ns = slots_.size();
    std::vector<Eigen::VectorXd> w(ns), jac_u(ns);
    std::vector<Eigen::MatrixXd> jac(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      const Eigen::VectorXd theta = x.segment(offsets_[s], specs_[s].q);
      w[s] = almon_weights(specs_[s], theta);
      if (grad != nullptr) {
        jac[s] = almon_weights_grad(specs_[s], theta);
        jac_u[s] = Eigen::VectorXd::Zero(specs_[s].p);
      }
    }

    double ss = 0.0;
    Eigen::VectorXd r;
    for (std::size_t t = 0; t < base_.size(); ++t) {
      r = base_[t];
      for (std::size_t s = 0; s < ns; ++s)
        r.noalias() += a_(slots_[s]) * (design_.lags[t][static_cast<std::size_t>(slots_[s])] * w[s]);
      ss += r.squaredNorm();
      if (grad != nullptr)
        for (std::size_t s = 0; s < ns; ++s)
          jac_u[s].noalias() += design_.lags[t][static_cast<std::size_t>(slots_[s])].transpose() * r;
    }

    if (grad != nullptr) {
      grad->resize(dim_);
      for (std::size_t s = 0; s < ns; ++s)
        grad->segment(offsets_[s], specs_[s].q) =
            2.0 * ds_ * a_(slots_[s]) * (jac[s].transpose() * jac_u[s]);
    }
    return ds_ * ss;
  }

private:
  const ModelSpec& spec_;
  const ResolvedDesign& design_;
  Eigen::VectorXd a_;
  double ds_;
  std::vector<int> slots_;  // regressor index per Almon slot
  std::vector<AlmonSpec> specs_;
  std::vector<int> offsets_;
  int dim_ = 0;
  std::vector<Eigen::VectorXd> base_;
};

std::vector<Eigen::VectorXd> start_theta(const ModelSpec& spec, const FitConfig& config,
                                         int restart) {
  std::vector<Eigen::VectorXd> theta(static_cast<std::size_t>(spec.n_regressors()));
  if (restart == 0 && !config.theta_init.empty()) {
    if (config.theta_init.size() != theta.size())
      throw std::invalid_argument("fit: theta_init needs one entry per regressor");
    for (int k = 0; k < spec.n_regressors(); ++k) {
      const auto& r = spec.regressors[k];
      const auto expected = r.family == WeightFamily::Almon ? r.q : 0;
      if (config.theta_init[static_cast<std::size_t>(k)].size() != expected)
        throw std::invalid_argument("fit: theta_init for '" + r.series_id + "' has wrong size");
    }
    return config.theta_init;
  }

  auto engine = make_engine(child_seed(config.seed, static_cast<std::uint64_t>(restart)));
  std::uniform_real_distribution<double> draw(-config.restart_radius, config.restart_radius);
  for (int k = 0; k < spec.n_regressors(); ++k) {
    const auto& r = spec.regressors[k];
    if (r.family != WeightFamily::Almon) continue;
    Eigen::VectorXd t = Eigen::VectorXd::Zero(r.q);
    if (restart > 0)
      for (int j = 0; j < r.q; ++j) t(j) = draw(engine);
    theta[static_cast<std::size_t>(k)] = t;
  }
  return theta;
}

Coefficients initial_coefficients(const ModelSpec& spec, std::vector<Eigen::VectorXd> theta) {
  Coefficients coef;
  coef.theta = std::move(theta);
  coef.a = Eigen::VectorXd::Zero(spec.n_regressors());
  coef.c.resize(static_cast<std::size_t>(spec.n_regressors()));
  int n_almon = 0;
  for (const auto& r : spec.regressors)
    if (r.family == WeightFamily::Almon) ++n_almon;
  for (int k = 0; k < spec.n_regressors(); ++k) {
    const auto& r = spec.regressors[k];
    if (r.family == WeightFamily::Almon)
      coef.a(k) = 1.0 / static_cast<double>(n_almon);
    else
      coef.c[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(r.p);
  }
  return coef;
}

}  // namespace

ResolvedDesign resolve_design(const ModelSpec& spec, const TrainingSet& train) {
  spec.validate();
  if (train.targets.empty()) throw EmptyHistory("fit: no target observations");
  const Grid grid = train.targets.begin()->second.grid();

  for (const auto& r : spec.regressors) {
    const auto it = train.regressors.find(r.series_id);
    if (it == train.regressors.end())
      throw Error("fit: regressor series '" + r.series_id + "' not supplied");
    if (it->second.grid() != nullptr && !(*it->second.grid() == grid))
      throw GridMismatch("fit: series '" + r.series_id + "' is not on the target grid");
  }

  ResolvedDesign design{grid, {}, {}, {}};
  for (const auto& [t, f] : train.targets) {
    if (!(f.grid() == grid)) throw GridMismatch("fit: target at " + t.str() + " changes grid");
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(spec.regressors.size());
    bool complete = true;
    for (const auto& r : spec.regressors) {
      try {
        blocks.push_back(resolve_lags(r, train.regressors.at(r.series_id), t));
      } catch (const MissingLag&) {
        complete = false;  // edge-of-sample period, skip it
        break;
      }
    }
    if (!complete) continue;
    design.times.push_back(t);
    design.targets.push_back(f.values());
    design.lags.push_back(std::move(blocks));
  }
  if (design.times.empty())
    throw EmptyHistory("fit: no target period has complete lag coverage");
  return design;
}

double objective(const ModelSpec& spec, const ResolvedDesign& design, const Coefficients& coef) {
  check_coefficients(spec, coef);
  double ss = 0.0;
  for (std::size_t t = 0; t < design.times.size(); ++t)
    ss += (combine(spec, design.lags[t], coef) - design.targets[t]).squaredNorm();
  return design.grid.spacing() * ss;
}

Eigen::VectorXd objective_theta_grad(const ModelSpec& spec, const ResolvedDesign& design,
                                     const Coefficients& coef) {
  check_coefficients(spec, coef);
  ThetaProblem problem(spec, design, coef);
  Eigen::VectorXd grad;
  problem.eval(problem.flatten(coef.theta), &grad);
  return grad;
}

CombinationSolution solve_a(const ModelSpec& spec, const ResolvedDesign& design,
                            const std::vector<Eigen::VectorXd>& theta) {
  spec.validate();
  const int T = design.n_periods();
  if (T == 0) throw EmptyHistory("fit: no usable target period");
  const int N = design.grid.n_points;

  // per-regressor lag weights under the current curve parameters
  std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(spec.n_regressors()));
  for (int k = 0; k < spec.n_regressors(); ++k) {
    const auto& r = spec.regressors[k];
    if (r.family == WeightFamily::Almon)
      w[static_cast<std::size_t>(k)] =
          almon_weights(AlmonSpec(r.q, r.p), theta.at(static_cast<std::size_t>(k)));
  }

  const ColumnLayout layout = layout_columns(spec);
  const int n_cols = static_cast<int>(layout.owner.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(T) * N, n_cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(T) * N);
  for (int t = 0; t < T; ++t) {
    y.segment(static_cast<Eigen::Index>(t) * N, N) = design.targets[static_cast<std::size_t>(t)];
    for (int j = 0; j < n_cols; ++j) {
      const int k = layout.owner[static_cast<std::size_t>(j)];
      const auto& block = design.lags[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
      if (layout.lag[static_cast<std::size_t>(j)] < 0)
        x.col(j).segment(static_cast<Eigen::Index>(t) * N, N).noalias() =
            block * w[static_cast<std::size_t>(k)];
      else
        x.col(j).segment(static_cast<Eigen::Index>(t) * N, N) =
            block.col(layout.lag[static_cast<std::size_t>(j)]);
    }
  }

  const Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::VectorXd proj = x.transpose() * y;
  const auto [beta, singular] = spec.kind == ModelKind::Midas ? simplex_qp(gram, proj)
                                                              : affine_ls(gram, proj);

  CombinationSolution sol;
  sol.singular = singular;
  sol.a = Eigen::VectorXd::Zero(spec.n_regressors());
  sol.c.resize(static_cast<std::size_t>(spec.n_regressors()));
  for (int k = 0; k < spec.n_regressors(); ++k)
    if (spec.regressors[k].family == WeightFamily::Unrestricted)
      sol.c[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(spec.regressors[k].p);
  for (int j = 0; j < n_cols; ++j) {
    const int k = layout.owner[static_cast<std::size_t>(j)];
    if (layout.lag[static_cast<std::size_t>(j)] < 0)
      sol.a(k) = beta(j);
    else
      sol.c[static_cast<std::size_t>(k)](layout.lag[static_cast<std::size_t>(j)]) = beta(j);
  }
  return sol;
}

ThetaSolution solve_theta(const ModelSpec& spec, const ResolvedDesign& design,
                          const Coefficients& start, const FitConfig& config) {
  check_coefficients(spec, start);
  const ThetaProblem prob(spec, design, start);
  if (prob.dim() == 0)
    return ThetaSolution{start.theta, objective(spec, design, start), 0, false};

  Eigen::VectorXd x = prob.flatten(start.theta);
  Eigen::VectorXd g(prob.dim());
  double f = prob.eval(x, &g);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(prob.dim(), prob.dim());
  const Eigen::MatrixXd eye = hinv;

  ThetaSolution out;
  out.stalled = false;
  int iter = 0;
  for (; iter < config.bfgs_max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= config.bfgs_grad_tol) break;

    Eigen::VectorXd dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // curvature estimate went bad, fall back to steepest descent
      hinv = eye;
      dir = -g;
      slope = g.dot(dir);
      if (!(slope < 0.0)) break;
    }

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = x + alpha * dir;
      f_new = prob.eval(x_new, nullptr);
      if (f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.stalled = true;
      break;
    }

    Eigen::VectorXd g_new(prob.dim());
    prob.eval(x_new, &g_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {  // skip the update when curvature information is unusable
      const double rho = 1.0 / sy;
      hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }

  out.theta = prob.unflatten(x);
  out.objective = f;
  out.iterations = iter;
  return out;
}

FittedModel fit_resolved(const ModelSpec& spec, const ResolvedDesign& design,
                         const FitConfig& config) {
  spec.validate();
  if (spec.kind == ModelKind::Ave) {
    FittedModel model{spec, design.grid, Coefficients{{}, Eigen::VectorXd(), {}}, {}};
    model.diagnostics.converged = true;
    model.diagnostics.outer_iterations = 0;
    return model;
  }

  const int T = design.n_periods();
  if (T == 0) throw EmptyHistory("fit: no usable target period");
  const long long n_obs = static_cast<long long>(T) * design.grid.n_points;
  if (n_obs < spec.parameter_count())
    throw NotIdentifiable("fit: " + std::to_string(spec.parameter_count()) +
                          " parameters against " + std::to_string(n_obs) + " data points");

  bool theta_moves = false;  // any Almon regressor whose weights can actually vary
  bool any_almon = false;
  for (const auto& r : spec.regressors) {
    if (r.family != WeightFamily::Almon) continue;
    any_almon = true;
    if (r.p > 1) theta_moves = true;
  }
  const int n_restarts = theta_moves && spec.kind == ModelKind::Midas ? config.restarts : 0;

  FittedModel best{spec, design.grid, {}, {}};
  bool have_best = false;

  for (int restart = 0; restart <= n_restarts; ++restart) {
    Coefficients coef = initial_coefficients(spec, start_theta(spec, config, restart));
    FitDiagnostics diag;
    diag.objective_trace.push_back(objective(spec, design, coef));

    double prev = diag.objective_trace.front();
    double current = prev;
    for (int it = 1; it <= config.max_outer_iterations; ++it) {
      auto comb = solve_a(spec, design, coef.theta);
      coef.a = comb.a;
      coef.c = comb.c;
      diag.singular_design = diag.singular_design || comb.singular;
      current = objective(spec, design, coef);
      check_monotone(current, diag.objective_trace.back());
      diag.objective_trace.push_back(current);

      if (any_almon) {
        auto ts = solve_theta(spec, design, coef, config);
        coef.theta = ts.theta;
        diag.line_search_stall = diag.line_search_stall || ts.stalled;
        check_monotone(ts.objective, current);
        current = ts.objective;
        diag.objective_trace.push_back(current);
      }

      diag.outer_iterations = it;
      if (prev - current <= config.tol * std::max(1.0, std::abs(prev))) {
        diag.converged = true;
        break;
      }
      prev = current;
    }
    diag.objective = current;

    if (!have_best || current < best.diagnostics.objective) {
      have_best = true;
      best.coef = coef;
      best.diagnostics = diag;
    }
  }
  return best;
}

FittedModel fit(const ModelSpec& spec, const TrainingSet& train, const FitConfig& config) {
  return fit_resolved(spec, resolve_design(spec, train), config);
}

OrderSelection select_order(const ModelSpec& base, const TrainingSet& train, int p_min, int p_max,
                            const FitConfig& config) {
  base.validate();
  if (base.kind == ModelKind::Ave)
    throw std::invalid_argument("order selection: averaging model has no lag order");
  if (p_min < 1 || p_max < p_min)
    throw std::invalid_argument("order selection: need 1 <= p_min <= p_max");

  std::vector<OrderCandidate> candidates;
  std::optional<FittedModel> best;
  int chosen = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int p = p_min; p <= p_max; ++p) {
    ModelSpec candidate = base;
    for (auto& r : candidate.regressors)
      if (r.m > 1) r.p = p;

    OrderCandidate entry{p, std::numeric_limits<double>::quiet_NaN(), false, ""};
    try {
      const ResolvedDesign design = resolve_design(candidate, train);
      FittedModel model = fit_resolved(candidate, design, config);
      const double periods = design.n_periods();
      entry.aic = 2.0 * candidate.parameter_count() +
                  periods * std::log(model.diagnostics.objective / periods);
      entry.ok = true;
      if (!best.has_value() || entry.aic < best_aic) {
        best_aic = entry.aic;
        chosen = p;
        best = std::move(model);
      }
    } catch (const std::exception& e) {
      entry.note = e.what();
    }
    candidates.push_back(entry);
  }
  if (!best.has_value()) throw Error("order selection: every candidate order failed to fit");
  return OrderSelection{chosen, std::move(candidates), std::move(*best)};
}

}  // namespace pdfmidas

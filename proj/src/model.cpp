#include "pdfmidas/model.hpp"

#include <set>
#include <stdexcept>

#include "pdfmidas/almon.hpp"

namespace pdfmidas {

MixedSeries::MixedSeries(int m) : m_(m) {
  if (m < 1) throw std::invalid_argument("series: frequency m must be >= 1");
}

void MixedSeries::insert(TimeIndex t, DensityGrid f) {
  if (m_ % t.den() != 0)
    throw Error("series: time " + t.str() + " is not a multiple of 1/" + std::to_string(m_));
  if (!entries_.empty() && !(entries_.begin()->second.grid() == f.grid()))
    throw GridMismatch("series: observation at " + t.str() + " uses a different grid");
  if (!entries_.emplace(t, std::move(f)).second)
    throw Error("series: duplicate observation at " + t.str());
}

const DensityGrid* MixedSeries::find(TimeIndex t) const {
  const auto it = entries_.find(t);
  return it == entries_.end() ? nullptr : &it->second;
}

const Grid* MixedSeries::grid() const {
  return entries_.empty() ? nullptr : &entries_.begin()->second.grid();
}

void RegressorSpec::validate() const {
  if (series_id.empty()) throw std::invalid_argument("regressor: empty series id");
  if (m < 1) throw std::invalid_argument("regressor '" + series_id + "': m must be >= 1");
  if (p < 1) throw std::invalid_argument("regressor '" + series_id + "': p must be >= 1");
  if (family == WeightFamily::Almon && (q < 1 || q > 4))
    throw std::invalid_argument("regressor '" + series_id + "': Almon order q must be in 1..4");
  if (h < TimeIndex(0))
    throw std::invalid_argument("regressor '" + series_id + "': horizon must be >= 0");
}

int ModelSpec::parameter_count() const {
  int n = 0;
  for (const auto& r : regressors)
    n += (r.family == WeightFamily::Almon) ? r.q + 1 : r.p;
  return n;
}

void ModelSpec::validate() const {
  if (kind == ModelKind::Ave) {
    if (!regressors.empty())
      throw std::invalid_argument("model: an averaging model takes no regressors");
    return;
  }
  if (regressors.empty()) throw std::invalid_argument("model: needs at least one regressor");
  std::set<std::string> ids;
  for (const auto& r : regressors) {
    r.validate();
    if (!ids.insert(r.series_id).second)
      throw std::invalid_argument("model: duplicate regressor series '" + r.series_id + "'");
    if (kind == ModelKind::Midas && r.family != WeightFamily::Almon)
      throw std::invalid_argument("model: a restricted combination admits only Almon regressors");
  }
}

void check_coefficients(const ModelSpec& spec, const Coefficients& coef) {
  const auto K = spec.regressors.size();
  if (coef.theta.size() != K || coef.c.size() != K || coef.a.size() != static_cast<Eigen::Index>(K))
    throw std::invalid_argument("coefficients: wrong number of regressor entries");
  for (std::size_t k = 0; k < K; ++k) {
    const auto& r = spec.regressors[k];
    if (r.family == WeightFamily::Almon) {
      if (coef.theta[k].size() != r.q)
        throw std::invalid_argument("coefficients: theta for '" + r.series_id +
                                    "' must have q entries");
      if (coef.c[k].size() != 0)
        throw std::invalid_argument("coefficients: '" + r.series_id +
                                    "' is an Almon regressor, c must be empty");
    } else {
      if (coef.c[k].size() != r.p)
        throw std::invalid_argument("coefficients: c for '" + r.series_id +
                                    "' must have p entries");
      if (coef.theta[k].size() != 0)
        throw std::invalid_argument("coefficients: '" + r.series_id +
                                    "' is unrestricted, theta must be empty");
    }
  }
}

Eigen::MatrixXd resolve_lags(const RegressorSpec& spec, const MixedSeries& series, TimeIndex t) {
  if (series.m() != spec.m)
    throw Error("regressor '" + spec.series_id + "': series frequency " +
                std::to_string(series.m()) + " does not match spec m = " + std::to_string(spec.m));
  const Grid* grid = series.grid();
  if (grid == nullptr) throw MissingLag(spec.series_id, t - spec.h - TimeIndex(1, spec.m));

  Eigen::MatrixXd block(grid->n_points, spec.p);
  for (int i = 1; i <= spec.p; ++i) {
    const TimeIndex at = t - spec.h - TimeIndex(i, spec.m);
    const DensityGrid* obs = series.find(at);
    if (obs == nullptr) throw MissingLag(spec.series_id, at);
    block.col(i - 1) = obs->values();
  }
  return block;
}

Eigen::VectorXd combine(const ModelSpec& spec, const std::vector<Eigen::MatrixXd>& blocks,
                        const Coefficients& coef) {
  check_coefficients(spec, coef);
  if (blocks.size() != spec.regressors.size())
    throw std::invalid_argument("combine: one lag block per regressor required");

  Eigen::VectorXd out = Eigen::VectorXd::Zero(blocks.empty() ? 0 : blocks.front().rows());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& r = spec.regressors[k];
    if (blocks[k].cols() != r.p || blocks[k].rows() != out.size())
      throw std::invalid_argument("combine: lag block for '" + r.series_id + "' has wrong shape");
    if (r.family == WeightFamily::Almon) {
      const Eigen::VectorXd w = almon_weights(AlmonSpec(r.q, r.p), coef.theta[k]);
      out.noalias() += coef.a(static_cast<Eigen::Index>(k)) * (blocks[k] * w);
    } else {
      out.noalias() += blocks[k] * coef.c[k];
    }
  }
  return out;
}

Prediction predict(const FittedModel& model, const std::map<std::string, MixedSeries>& data,
                   TimeIndex t) {
  model.spec.validate();
  if (model.spec.kind == ModelKind::Ave) {
    const auto it = data.find("target");
    if (it == data.end()) throw Error("predict: averaging model needs the 'target' series");
    if (it->second.grid() != nullptr && !(*it->second.grid() == model.grid))
      throw GridMismatch("predict: target history is not on the model grid");
    return predict_ave(it->second, t);
  }

  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(model.spec.regressors.size());
  for (const auto& r : model.spec.regressors) {
    const auto it = data.find(r.series_id);
    if (it == data.end()) throw Error("predict: series '" + r.series_id + "' not supplied");
    if (it->second.grid() != nullptr && !(*it->second.grid() == model.grid))
      throw GridMismatch("predict: series '" + r.series_id + "' is not on the model grid");
    blocks.push_back(resolve_lags(r, it->second, t));
  }

  Eigen::VectorXd f = combine(model.spec, blocks, model.coef);
  const bool clipped = (f.array() < 0.0).any();
  if (clipped) f = f.cwiseMax(0.0);
  return Prediction{DensityGrid(model.grid, std::move(f)), clipped};
}

Prediction predict_ave(const MixedSeries& target_history, TimeIndex t) {
  const Grid* grid = target_history.grid();
  if (grid == nullptr) throw EmptyHistory("average forecast: target history is empty");

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(grid->n_points);
  int n = 0;
  for (const auto& [time, density] : target_history.entries()) {
    if (!(time < t)) break;  // entries are time-ordered
    acc += density.values();
    ++n;
  }
  if (n == 0) throw EmptyHistory("average forecast: no target observation precedes t = " + t.str());
  return Prediction{DensityGrid(*grid, acc / static_cast<double>(n)), false};
}

}  // namespace pdfmidas

// Command-line front end: fit, predict, simulate, select-order and
// bootstrap-test over CSV panels / curve tables and TOML-style run configs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdfmidas/bootstrap.hpp"
#include "pdfmidas/estimator.hpp"
#include "pdfmidas/io.hpp"
#include "pdfmidas/simulate.hpp"

namespace fs = std::filesystem;
namespace pm = pdfmidas;
using nlohmann::json;

namespace {

pm::Grid parse_grid_flag(const std::string& text) {
  const auto c1 = text.find(',');
  const auto c2 = text.find(',', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw pm::SchemaError("--grid expects lo,hi,n_points");
  try {
    return pm::Grid(std::stod(text.substr(0, c1)), std::stod(text.substr(c1 + 1, c2 - c1 - 1)),
                    std::stoi(text.substr(c2 + 1)));
  } catch (const std::invalid_argument&) {
    throw pm::SchemaError("--grid expects lo,hi,n_points, got '" + text + "'");
  } catch (const std::out_of_range&) {
    throw pm::SchemaError("--grid expects lo,hi,n_points, got '" + text + "'");
  }
}

bool is_panel_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw pm::SchemaError("cannot open '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header == "series_id,time_num,time_den,value") return true;
  if (header.rfind("series_id,time_num,time_den,s_1", 0) == 0) return false;
  throw pm::SchemaError("'" + path.string() + "': unrecognized header (need a sample panel or a curve table)");
}

struct Ingested {
  pm::Grid grid;
  std::map<pm::TimeIndex, pm::DensityGrid> targets;
  std::map<std::string, pm::MixedSeries> series;
};

//! Load a data file and turn every series into unit-mass curves on one grid.
//! Sample panels are smoothed with the rule-of-thumb kernel estimator and
//! need the grid supplied; curve tables carry their own grid in the sidecar.
Ingested ingest(const fs::path& data, const pm::ModelSpec& spec,
                const std::optional<pm::Grid>& grid_hint) {
  std::optional<pm::Grid> grid;
  std::map<std::string, std::map<pm::TimeIndex, Eigen::VectorXd>> curves;

  if (is_panel_file(data)) {
    if (!grid_hint)
      throw pm::SchemaError("sample panel input needs a grid ([grid] section or --grid)");
    grid = *grid_hint;
    const pm::SamplePanel panel = pm::read_panel_csv(data);
    std::map<std::string, int> narrow;
    for (const auto& [id, by_time] : panel)
      for (const auto& [t, obs] : by_time) {
        const pm::DensityGrid dens = pm::kde(pm::SampleSet(obs), *grid);
        if (dens.mass() < 0.98) ++narrow[id];  // mass leaked off the grid before renormalizing
        curves[id].emplace(t, dens.renormalized().values());
      }
    for (const auto& [id, count] : narrow)
      std::cerr << "warning: series '" << id << "': " << count
                << " estimated curve(s) lose over 2% mass off the grid; consider a wider grid\n";
  } else {
    pm::CurveTable table = pm::read_curves_csv(data);
    if (grid_hint && !(*grid_hint == table.grid))
      throw pm::SchemaError("'" + data.string() + "': file grid differs from the requested grid");
    grid = table.grid;
    for (auto& [id, by_time] : table.rows)
      for (auto& [t, values] : by_time)
        curves[id].emplace(t, pm::DensityGrid(*grid, values).renormalized().values());
  }

  Ingested out{*grid, {}, {}};
  if (const auto it = curves.find("target"); it != curves.end())
    for (const auto& [t, v] : it->second) out.targets.emplace(t, pm::DensityGrid(*grid, v));
  for (const auto& r : spec.regressors) {
    const auto it = curves.find(r.series_id);
    if (it == curves.end()) continue;  // the estimator reports missing series precisely
    pm::MixedSeries series(r.m);
    for (const auto& [t, v] : it->second) series.insert(t, pm::DensityGrid(*grid, v));
    out.series.emplace(r.series_id, std::move(series));
  }
  return out;
}

//! Target history as a series keyed on the finest lattice present, for the
//! averaging forecast.
pm::MixedSeries target_series(const std::map<pm::TimeIndex, pm::DensityGrid>& targets) {
  std::int64_t den = 1;
  for (const auto& [t, f] : targets) den = std::lcm(den, t.den());
  pm::MixedSeries series(static_cast<int>(den));
  for (const auto& [t, f] : targets) series.insert(t, f);
  return series;
}

std::map<std::string, std::string> run_info(const std::string& command,
                                            const std::string& data_path,
                                            const std::string& config_path,
                                            const pm::FitConfig& fit) {
  return {{"command", command},
          {"data", data_path},
          {"config", config_path},
          {"seed", std::to_string(fit.seed)},
          {"restarts", std::to_string(fit.restarts)},
          {"tol", pm::format_double(fit.tol)},
          {"max_outer_iterations", std::to_string(fit.max_outer_iterations)}};
}

void print_fit_summary(const pm::FittedModel& model) {
  const auto& d = model.diagnostics;
  std::cout << "objective " << pm::format_double(d.objective) << " after " << d.outer_iterations
            << " outer iteration(s), " << (d.converged ? "converged" : "not converged") << "\n";
  if (d.singular_design)
    std::cerr << "warning: a rank-deficient combination system was solved in the minimum-norm sense\n";
  if (d.line_search_stall)
    std::cerr << "warning: the curve-parameter line search stalled at least once\n";
  for (int k = 0; k < model.spec.n_regressors(); ++k) {
    const auto& r = model.spec.regressors[k];
    std::cout << "  " << r.series_id;
    if (r.family == pm::WeightFamily::Almon) {
      std::cout << ": a = " << pm::format_double(model.coef.a(k)) << ", theta = [";
      const auto& th = model.coef.theta[static_cast<std::size_t>(k)];
      for (Eigen::Index j = 0; j < th.size(); ++j)
        std::cout << (j ? ", " : "") << pm::format_double(th(j));
      std::cout << "]\n";
    } else {
      std::cout << ": unrestricted, " << r.p << " lag coefficient(s)\n";
    }
  }
}

struct CommandArgs {
  std::string data;
  std::string config;
  std::string out = ".";
  std::string grid;
  std::string model;
  std::string at;
  std::string truth;
  std::string p_grid;
  std::uint64_t seed = 0;
  bool emit_panel = false;
};

int cmd_fit(const CommandArgs& args, bool seed_set) {
  pm::RunConfig cfg = pm::load_config(args.config);
  if (!cfg.model) throw pm::SchemaError("config: fit needs a [model] section");
  if (seed_set) cfg.fit.seed = args.seed;
  std::optional<pm::Grid> grid_hint = cfg.grid;
  if (!args.grid.empty()) grid_hint = parse_grid_flag(args.grid);

  pm::ModelSpec spec = *cfg.model;
  spec.validate();
  Ingested data = ingest(args.data, spec, grid_hint);
  const pm::TrainingSet train{std::move(data.targets), std::move(data.series)};
  const pm::ResolvedDesign design = pm::resolve_design(spec, train);
  const pm::FittedModel model = pm::fit_resolved(spec, design, cfg.fit);

  const fs::path out(args.out);
  pm::write_model_json(out / "model.json", model,
                       run_info("fit", args.data, args.config, cfg.fit));

  if (spec.kind != pm::ModelKind::Ave) {
    std::string trace = "step,objective\n";
    for (std::size_t i = 0; i < model.diagnostics.objective_trace.size(); ++i)
      trace += std::to_string(i) + "," + pm::format_double(model.diagnostics.objective_trace[i]) + "\n";
    pm::atomic_write(out / "objective_trace.csv", trace);

    pm::CurveTable fitted{model.grid, {}};
    for (std::size_t i = 0; i < design.times.size(); ++i)
      fitted.rows["fitted"].emplace(design.times[i], pm::combine(spec, design.lags[i], model.coef));
    pm::write_curves_csv(out / "fitted.csv", fitted);
  }

  print_fit_summary(model);
  return 0;
}

int cmd_predict(const CommandArgs& args) {
  const pm::FittedModel model = pm::read_model_json(args.model);
  pm::TimeIndex at(0);
  try {
    at = pm::TimeIndex::parse(args.at);
  } catch (const std::invalid_argument&) {
    throw pm::SchemaError("--at expects an integer or num/den time, got '" + args.at + "'");
  }

  Ingested data = ingest(args.data, model.spec, model.grid);
  std::map<std::string, pm::MixedSeries> series = std::move(data.series);
  if (!data.targets.empty()) series.emplace("target", target_series(data.targets));

  const pm::Prediction pred = pm::predict(model, series, at);
  if (pred.clipping_applied)
    std::cerr << "warning: negative ordinates in the combination were clipped to zero\n";

  const fs::path out(args.out);
  pm::CurveTable curve{model.grid, {}};
  curve.rows["predicted"].emplace(at, pred.density.values());
  pm::write_curves_csv(out / "predicted.csv", curve);

  const pm::MomentSummary m = pm::moments(pred.density);
  std::string mo = "mean,sd,q25,median,q75,skewness,excess_kurtosis\n";
  mo += pm::format_double(m.mean) + "," + pm::format_double(m.sd) + "," +
        pm::format_double(m.q25) + "," + pm::format_double(m.median) + "," +
        pm::format_double(m.q75) + "," + pm::format_double(m.skewness) + "," +
        pm::format_double(m.excess_kurtosis) + "\n";
  pm::atomic_write(out / "moments.csv", mo);
  std::cout << "predicted density at t = " << at.str() << ": mean " << pm::format_double(m.mean)
            << ", sd " << pm::format_double(m.sd) << "\n";

  if (!args.truth.empty()) {
    const pm::CurveTable table = pm::read_curves_csv(args.truth);
    if (!(table.grid == model.grid))
      throw pm::SchemaError("'" + args.truth + "': grid differs from the model grid");
    const auto sit = table.rows.find("target");
    if (sit == table.rows.end() || sit->second.find(at) == sit->second.end())
      throw pm::SchemaError("'" + args.truth + "': no 'target' row at t = " + at.str());
    const pm::DensityGrid truth(model.grid, sit->second.at(at));

    const double l2 = pm::distance(truth, pred.density, pm::DistanceKind::L2);
    std::string metrics = "metric,value\n";
    metrics += "l2," + pm::format_double(l2) + "\n";
    metrics += "mse," + pm::format_double(l2 * l2) + "\n";
    metrics += "l1," + pm::format_double(pm::distance(truth, pred.density, pm::DistanceKind::L1)) + "\n";
    metrics += "linf," + pm::format_double(pm::distance(truth, pred.density, pm::DistanceKind::Linf)) + "\n";
    metrics +=
        "hellinger," + pm::format_double(pm::distance(truth, pred.density, pm::DistanceKind::Hellinger)) + "\n";
    metrics += "w1," + pm::format_double(pm::wasserstein1(truth, pred.density)) + "\n";
    pm::atomic_write(out / "metrics.csv", metrics);
    std::cout << "squared L2 against truth: " << pm::format_double(l2 * l2) << "\n";
  }
  return 0;
}

int cmd_simulate(const CommandArgs& args, bool seed_set) {
  pm::RunConfig cfg = pm::load_config(args.config);
  if (!cfg.sim) throw pm::SchemaError("config: simulate needs a [sim] section");
  pm::SimDesign design = *cfg.sim;
  if (seed_set) design.seed = args.seed;
  const fs::path out(args.out);

  if (!args.emit_panel) {
    const pm::SimReport report = pm::run_study(design);
    std::string csv = "parameter,truth,bias,sd,rmse\n";
    for (const auto& s : report.stats)
      csv += s.name + "," + pm::format_double(s.truth) + "," + pm::format_double(s.bias) + "," +
             pm::format_double(s.sd) + "," + pm::format_double(s.rmse) + "\n";
    pm::atomic_write(out / "report.csv", csv);

    json meta;
    meta["replications_requested"] = report.replications_requested;
    meta["replications_effective"] = report.replications_effective;
    pm::atomic_write(out / "report_meta.json", meta.dump(2) + "\n");

    std::cout << "parameter            truth       bias         sd       rmse\n";
    for (const auto& s : report.stats) {
      std::printf("%-18s %9.4f %10.6f %10.6f %10.6f\n", s.name.c_str(), s.truth, s.bias, s.sd,
                  s.rmse);
    }
    std::cout << report.replications_effective << " of " << report.replications_requested
              << " replication(s) usable\n";
    return 0;
  }

  const pm::SyntheticPanel panel = pm::make_panel(design);

  // training panel: every draw except the final target period, which is held
  // out as the forecast evaluation period (its truth is in truth_grids.csv)
  pm::SamplePanel samples;
  const pm::TimeIndex last(design.periods);
  for (const auto& [id, by_time] : panel.draws)
    for (const auto& [t, v] : by_time) {
      if (id == "target" && t == last) continue;
      samples[id].emplace(t, v);
    }
  pm::write_panel_csv(out / "panel.csv", samples);

  pm::CurveTable truth{panel.grid, {}};
  for (const auto& [t, f] : panel.target_truth) truth.rows["target"].emplace(t, f.values());
  for (const auto& [id, series] : panel.regressor_truth)
    for (const auto& [t, f] : series.entries()) truth.rows[id].emplace(t, f.values());
  pm::write_curves_csv(out / "truth_grids.csv", truth);

  json tj;
  tj["horizon"] = design.horizon.str();
  tj["a"] = std::vector<double>(panel.truth.a.data(), panel.truth.a.data() + panel.truth.a.size());
  tj["theta"] = json::object();
  tj["m"] = json::object();
  tj["p"] = json::object();
  for (std::size_t k = 0; k < design.regressors.size(); ++k) {
    const auto& law = design.regressors[k];
    tj["theta"][law.id] =
        std::vector<double>(law.theta.data(), law.theta.data() + law.theta.size());
    tj["m"][law.id] = law.m;
    tj["p"][law.id] = law.p;
  }
  pm::atomic_write(out / "truth.json", tj.dump(2) + "\n");

  std::cout << "wrote panel.csv (target held out at t = " << last.str()
            << "), truth_grids.csv and truth.json\n";
  return 0;
}

int cmd_select_order(const CommandArgs& args, bool seed_set) {
  pm::RunConfig cfg = pm::load_config(args.config);
  if (!cfg.model) throw pm::SchemaError("config: select-order needs a [model] section");
  if (seed_set) cfg.fit.seed = args.seed;

  int p_min = 0, p_max = 0;
  if (!args.p_grid.empty()) {
    const auto colon = args.p_grid.find(':');
    if (colon == std::string::npos) throw pm::SchemaError("--p-grid expects LO:HI");
    try {
      p_min = std::stoi(args.p_grid.substr(0, colon));
      p_max = std::stoi(args.p_grid.substr(colon + 1));
    } catch (const std::exception&) {
      throw pm::SchemaError("--p-grid expects LO:HI, got '" + args.p_grid + "'");
    }
  } else if (cfg.select) {
    p_min = cfg.select->p_min;
    p_max = cfg.select->p_max;
  } else {
    throw pm::SchemaError("select-order needs --p-grid or a [select] section");
  }

  pm::ModelSpec spec = *cfg.model;
  spec.validate();
  std::optional<pm::Grid> grid_hint = cfg.grid;
  if (!args.grid.empty()) grid_hint = parse_grid_flag(args.grid);
  Ingested data = ingest(args.data, spec, grid_hint);
  const pm::TrainingSet train{std::move(data.targets), std::move(data.series)};

  const pm::OrderSelection sel = pm::select_order(spec, train, p_min, p_max, cfg.fit);

  std::string csv = "p,aic,status,note\n";
  for (const auto& c : sel.candidates) {
    std::string note = c.note;
    for (auto& ch : note)
      if (ch == ',' || ch == '\n') ch = ';';
    csv += std::to_string(c.p) + "," + pm::format_double(c.aic) + "," +
           (c.ok ? "ok" : "failed") + "," + note + "\n";
  }
  const fs::path out(args.out);
  pm::atomic_write(out / "aic.csv", csv);
  pm::write_model_json(out / "model.json", sel.best,
                       run_info("select-order", args.data, args.config, cfg.fit));

  std::cout << "selected p = " << sel.chosen_p << "\n";
  return 0;
}

int cmd_bootstrap(const CommandArgs& args, bool seed_set) {
  pm::RunConfig cfg = pm::load_config(args.config);
  if (!cfg.model) throw pm::SchemaError("config: bootstrap-test needs a [model] section");
  if (seed_set) {
    cfg.fit.seed = args.seed;
    cfg.bootstrap.seed = args.seed;
    cfg.bootstrap.fit.seed = args.seed;
  }

  pm::ModelSpec spec = *cfg.model;
  spec.validate();
  std::optional<pm::Grid> grid_hint = cfg.grid;
  if (!args.grid.empty()) grid_hint = parse_grid_flag(args.grid);
  Ingested data = ingest(args.data, spec, grid_hint);
  const pm::TrainingSet train{std::move(data.targets), std::move(data.series)};
  const pm::ResolvedDesign design = pm::resolve_design(spec, train);
  const pm::FittedModel model = pm::fit_resolved(spec, design, cfg.fit);
  const pm::BootstrapReport report = pm::bootstrap_test_resolved(model, design, cfg.bootstrap);

  const fs::path out(args.out);
  std::string csv = "coefficient,estimate,p_value,n_effective\n";
  for (const auto& t : report.tests)
    csv += t.coefficient + "," + pm::format_double(t.estimate) + "," +
           pm::format_double(t.p_value) + "," + std::to_string(report.n_effective) + "\n";
  pm::atomic_write(out / "bootstrap.csv", csv);
  pm::write_model_json(out / "model.json", model,
                       run_info("bootstrap-test", args.data, args.config, cfg.fit));

  if (report.excessive_failures)
    std::cerr << "warning: more than " << pm::format_double(100.0 * cfg.bootstrap.max_failure_share)
              << "% of replicate refits failed (" << report.n_effective << " of "
              << report.n_requested << " kept)\n";
  for (const auto& t : report.tests)
    std::cout << t.coefficient << ": estimate " << pm::format_double(t.estimate) << ", p = "
              << pm::format_double(t.p_value) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"density-valued mixed-frequency forecasting"};
  app.require_subcommand(1);
  CommandArgs args;

  auto* fit = app.add_subcommand("fit", "estimate a model from a data file");
  fit->add_option("data", args.data, "sample panel or curve CSV")->required();
  fit->add_option("--config", args.config, "run config file")->required();
  fit->add_option("--out", args.out, "output directory");
  fit->add_option("--seed", args.seed, "override the fit seed");
  fit->add_option("--grid", args.grid, "grid as lo,hi,n_points (panels only)");

  auto* predict = app.add_subcommand("predict", "forecast one density from a fitted model");
  predict->add_option("model", args.model, "model.json from fit")->required();
  predict->add_option("data", args.data, "sample panel or curve CSV")->required();
  predict->add_option("--at", args.at, "target time (integer or num/den)")->required();
  predict->add_option("--truth", args.truth, "curve CSV with the true 'target' row");
  predict->add_option("--out", args.out, "output directory");

  auto* simulate = app.add_subcommand("simulate", "estimator-quality study or synthetic panel");
  simulate->add_option("--config", args.config, "run config file with a [sim] section")->required();
  simulate->add_flag("--emit-panel", args.emit_panel,
                     "write a synthetic panel plus exact truth instead of running the study");
  simulate->add_option("--out", args.out, "output directory");
  simulate->add_option("--seed", args.seed, "override the simulation seed");

  auto* select = app.add_subcommand("select-order", "pick the lag order by information criterion");
  select->add_option("data", args.data, "sample panel or curve CSV")->required();
  select->add_option("--config", args.config, "run config file")->required();
  select->add_option("--p-grid", args.p_grid, "candidate orders LO:HI");
  select->add_option("--out", args.out, "output directory");
  select->add_option("--seed", args.seed, "override the fit seed");
  select->add_option("--grid", args.grid, "grid as lo,hi,n_points (panels only)");

  auto* boot = app.add_subcommand("bootstrap-test", "significance of the combination weights");
  boot->add_option("data", args.data, "sample panel or curve CSV")->required();
  boot->add_option("--config", args.config, "run config file")->required();
  boot->add_option("--out", args.out, "output directory");
  boot->add_option("--seed", args.seed, "override fit and bootstrap seeds");
  boot->add_option("--grid", args.grid, "grid as lo,hi,n_points (panels only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(args, fit->count("--seed") > 0);
    if (predict->parsed()) return cmd_predict(args);
    if (simulate->parsed()) return cmd_simulate(args, simulate->count("--seed") > 0);
    if (select->parsed()) return cmd_select_order(args, select->count("--seed") > 0);
    if (boot->parsed()) return cmd_bootstrap(args, boot->count("--seed") > 0);
    return 2;
  } catch (const pm::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pm::NotIdentifiable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const pm::MissingLag& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
}

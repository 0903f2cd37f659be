#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "pdfmidas/bootstrap.hpp"
#include "pdfmidas/estimator.hpp"
#include "pdfmidas/simulate.hpp"

namespace pdfmidas {

//! Raw observations per series and time: the on-disk sample panel.
using SamplePanel = std::map<std::string, std::map<TimeIndex, Eigen::VectorXd>>;

//! Curve ordinates per series and time on one shared grid.
struct CurveTable {
  Grid grid;
  std::map<std::string, std::map<TimeIndex, Eigen::VectorXd>> rows;
};

//! Shortest-round-trip decimal text for a double; the one formatter every
//! writer uses, so equal numbers always serialize to equal bytes.
std::string format_double(double v);

//! Write via a temporary file in the same directory plus an atomic rename,
//! creating parent directories as needed.
void atomic_write(const std::filesystem::path& path, const std::string& content);

//! Sample panel CSV: header `series_id,time_num,time_den,value`, one
//! observation per row, time as an exact fraction.
SamplePanel read_panel_csv(const std::filesystem::path& path);
void write_panel_csv(const std::filesystem::path& path, const SamplePanel& panel);

//! Curve CSV: header `series_id,time_num,time_den,s_1,...,s_N` with the grid
//! in a JSON sidecar `{lo, hi, n_points}` next to the file (same name,
//! .json extension).
CurveTable read_curves_csv(const std::filesystem::path& csv_path);
void write_curves_csv(const std::filesystem::path& csv_path, const CurveTable& table);
std::filesystem::path sidecar_path(std::filesystem::path csv_path);

//! Fitted model as JSON, with a free-form `run` section echoing how it was
//! produced.
void write_model_json(const std::filesystem::path& path, const FittedModel& model,
                      const std::map<std::string, std::string>& run_info);
FittedModel read_model_json(const std::filesystem::path& path);

//! Everything a run config file can carry. Sections are optional; each
//! command checks for the ones it needs.
struct SelectRange {
  int p_min = 1;
  int p_max = 1;
};

struct RunConfig {
  std::optional<Grid> grid;
  std::optional<ModelSpec> model;
  FitConfig fit;
  BootstrapConfig bootstrap;  // its nested fit settings mirror `fit`
  std::optional<SelectRange> select;
  std::optional<SimDesign> sim;
};

//! Parse a TOML-style config file. Unknown keys or sections are errors, as
//! are type mismatches; all messages carry the offending line.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace pdfmidas

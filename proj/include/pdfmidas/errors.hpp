#pragma once

#include <stdexcept>
#include <string>

#include "pdfmidas/time_index.hpp"

namespace pdfmidas {

//! Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Two gridded densities (or a density and a model) live on different grids.
struct GridMismatch : Error {
  using Error::Error;
};

//! A sample set cannot support a kernel density estimate (fewer than two
//! distinct points, so the bandwidth rule degenerates to zero).
struct DegenerateSample : Error {
  using Error::Error;
};

//! A required lag position has no observation in the series.
struct MissingLag : Error {
  MissingLag(const std::string& series_id, TimeIndex at)
      : Error("series '" + series_id + "' has no observation at t = " + at.str()),
        series_id(series_id),
        at(at) {}
  std::string series_id;
  TimeIndex at;
};

//! A model needs at least one usable target period and none exists.
struct EmptyHistory : Error {
  using Error::Error;
};

//! More free parameters than data points; the fit is not identified.
struct NotIdentifiable : Error {
  using Error::Error;
};

//! Malformed input: a config key, CSV row or JSON field violates the schema.
struct SchemaError : Error {
  using Error::Error;
};

}  // namespace pdfmidas

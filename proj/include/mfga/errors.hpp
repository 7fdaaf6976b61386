#pragma once

#include <stdexcept>
#include <string>

namespace mfga {

// Base type for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- data ingestion ---

struct MissingColumn : Error {
  explicit MissingColumn(const std::string& name)
      : Error("column '" + name + "' not found in header") {}
};

struct NonNumericCell : Error {
  NonNumericCell(std::size_t row, const std::string& column, const std::string& cell)
      : Error("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
              ", column '" + column + "'") {}
};

struct EmptyFile : Error {
  explicit EmptyFile(const std::string& path) : Error("no data in file: " + path) {}
};

struct DegenerateResponse : Error {
  using Error::Error;
};

struct TooFewRows : Error {
  using Error::Error;
};

// --- shapes and indexing ---

struct DimensionMismatch : Error {
  using Error::Error;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct InvalidSimplex : Error {
  using Error::Error;
};

// --- solvers ---

struct Exhausted : Error {
  using Error::Error;
};

struct SingularSystem : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  using Error::Error;
};

struct DegenerateScores : Error {
  using Error::Error;
};

// --- configuration and result files ---

struct ConfigError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

}  // namespace mfga

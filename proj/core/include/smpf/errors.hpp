#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smpf {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad hyperparameters, unknown fields, bad presets).
struct ConfigError : Error {
  using Error::Error;
};

// File system problems: missing files, unreadable/unwritable paths.
struct IoError : Error {
  using Error::Error;
};

// Malformed or inconsistent data: shape mismatches, bad CSV cells,
// degenerate metric inputs, oracle dimension conflicts.
struct DataError : Error {
  using Error::Error;
};

// Text that does not conform to the expression grammar or a serialized
// tree document; carries the byte offset of the first offending token.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t pos)
      : Error(what + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

}  // namespace smpf

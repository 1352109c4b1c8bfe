#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ncelm {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (bad UTF-8, unparsable lines).
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t byte_offset)
      : Error(what + " at byte offset " + std::to_string(byte_offset)),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Invalid option values or incompatible shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A noise/proposal distribution has zero mass on a word it was asked about.
class SupportError : public Error {
 public:
  using Error::Error;
};

// Importance weights collapsed numerically (all zero or non-finite).
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

// Non-finite parameter values after an update.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string tensor)
      : Error(what), tensor_(std::move(tensor)) {}

  const std::string& tensor() const { return tensor_; }

  // Path of the most recent checkpoint written before divergence; empty when
  // none was written.
  std::string last_good_checkpoint;
  int epoch = -1;

 private:
  std::string tensor_;
};

// Unreadable or mismatched file formats.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ncelm

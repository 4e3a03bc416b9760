#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selmix {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

  // 1-based line number in the source file (the header is line 1).
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

// No example satisfies the pairing predicate for an anchor.
class NoPartnerError : public Error {
 public:
  NoPartnerError(int class_index, int domain_index)
      : Error("no eligible partner for anchor in group (class " +
              std::to_string(class_index) + ", domain " +
              std::to_string(domain_index) + ")"),
        class_index_(class_index),
        domain_index_(domain_index) {}

  int class_index() const { return class_index_; }
  int domain_index() const { return domain_index_; }

 private:
  int class_index_;
  int domain_index_;
};

// Raised by batch construction once the retry budget for partner-starved
// anchors is exhausted.
class PartnerStarvationError : public Error {
 public:
  PartnerStarvationError(int class_index, int domain_index, int retries)
      : Error("partner starvation: anchor group (class " +
              std::to_string(class_index) + ", domain " +
              std::to_string(domain_index) + ") had no eligible partner after " +
              std::to_string(retries) + " retries"),
        class_index_(class_index),
        domain_index_(domain_index) {}

  int class_index() const { return class_index_; }
  int domain_index() const { return domain_index_; }

 private:
  int class_index_;
  int domain_index_;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace selmix

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisygate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (missing assignment keys,
/// unknown ids, out-of-range indices).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A closed-form update was asked to condition on an event of probability 0.
class ImpossibleEvidenceError : public Error {
 public:
  using Error::Error;
};

/// The observed answers have joint probability 0 under the model.
/// `gates()` is an irreducible subset of the observed gates that is already
/// impossible on its own.
class InconsistentEvidenceError : public Error {
 public:
  InconsistentEvidenceError(std::string message, std::vector<std::string> gates)
      : Error(std::move(message)), gates_(std::move(gates)) {}

  const std::vector<std::string>& gates() const noexcept { return gates_; }

 private:
  std::vector<std::string> gates_;
};

/// An exponential path (oracle enumeration, CPT materialisation, joint
/// conditioning) was asked to exceed its size cap.
class CapacityError : public Error {
 public:
  CapacityError(std::string what, std::size_t requested, std::size_t cap)
      : Error(what + ": " + std::to_string(requested) + " exceeds cap of " +
              std::to_string(cap)),
        requested_(requested),
        cap_(cap) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t requested_;
  std::size_t cap_;
};

/// Malformed input document.
class ParseError : public Error {
 public:
  enum class Kind { Syntax, Schema, Version, Validation };

  ParseError(Kind kind, std::string message, std::size_t line = 0,
             std::size_t column = 0)
      : Error(std::move(message)), kind_(kind), line_(line), column_(column) {}

  Kind kind() const noexcept { return kind_; }
  /// 1-based; 0 when the position is unknown.
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::size_t column_;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace noisygate

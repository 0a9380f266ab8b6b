#pragma once

#include <stdexcept>
#include <string>

namespace rpcaf {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file header or unparsable content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Declared dimensions disagree with the payload actually present.
class TruncationError : public Error {
 public:
  using Error::Error;
};

// A value violates a domain invariant (non-finite entry, bad fraction, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Incompatible matrix shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Requested rank is out of range or the input is rank-deficient.
class RankError : public Error {
 public:
  using Error::Error;
};

// A row-norm constraint cannot be met (zero feature row with a violated cap).
class InfeasibleRowError : public Error {
 public:
  using Error::Error;
};

// A quantity that must be nonzero (e.g. a reference matrix in a relative
// error) vanished.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// The synthetic generator exhausted its rejection budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Invalid generator specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

// The solver produced a non-finite iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, int iteration)
      : Error(msg), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// A numerical lemma check found a counterexample.
class LemmaViolationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rpcaf

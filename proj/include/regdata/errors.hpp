#pragma once

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// its exit-code contract: 0 ok, 1 precondition, 2 parse, 3 blow-up,
// 4 iteration cap.

#include <stdexcept>
#include <string>

namespace regdata {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched or inconsistent matrix/vector shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Matrix fails a symmetry tolerance where a symmetric one is required.
class NotSymmetricError : public Error {
 public:
  using Error::Error;
};

// Square solve on a matrix that is singular at the rank tolerance.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// Least-squares matrix (or a data rank condition) below full column rank.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, long long rank, long long required)
      : Error(what + " (rank " + std::to_string(rank) + ", required " +
              std::to_string(required) + ")"),
        rank_(rank),
        required_(required) {}

  long long rank() const { return rank_; }
  long long required() const { return required_; }

 private:
  long long rank_;
  long long required_;
};

// A matrix required to be Hurwitz (or a gain required to stabilize) is not.
class NotHurwitzError : public Error {
 public:
  using Error::Error;
};

// Simulated state exceeded the blow-up cap.
class BlowUpError : public Error {
 public:
  using Error::Error;
};

// Iteration count or reset count exceeded its cap.
class IterationCapError : public Error {
 public:
  using Error::Error;
};

// Config or input file could not be parsed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace regdata

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surfnet {

// Every library error derives from Error so callers (the CLI in particular)
// can separate configuration problems from runtime failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class SlackBudgetExceeded : public Error {
 public:
  SlackBudgetExceeded(std::size_t slack_size, std::size_t budget)
      : Error("slack set has " + std::to_string(slack_size) +
              " entries, budget is " + std::to_string(budget) +
              " (tau too large?)"),
        slack_size_(slack_size),
        budget_(budget) {}

  std::size_t slack_size() const { return slack_size_; }
  std::size_t budget() const { return budget_; }

 private:
  std::size_t slack_size_;
  std::size_t budget_;
};

class InfeasiblePiece : public Error {
 public:
  using Error::Error;
};

class NonFiniteEncountered : public Error {
 public:
  using Error::Error;
};

class OracleIntractable : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace surfnet

#pragma once

#include <stdexcept>
#include <string>

namespace motad {

// Bad argument to a library call (sizes, ranges, missing optional inputs).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A robust statistic was asked for over zero selected samples.
class EmptySelection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometric estimation with a rank-deficient point configuration.
class DegenerateConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration file or command-line validation failure (exit code 1).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An upstream pipeline stage has not produced its artifacts (exit code 2).
class MissingStage : public std::runtime_error {
 public:
  MissingStage(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Metrics that need both classes were given only one.
class SingleClassError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace motad

#pragma once

#include <stdexcept>
#include <string>

namespace irisloc {

/// Contract violation on tensor shapes or operation arguments.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable, unparsable or inconsistent input data (files, corpora, weights).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required (e.g. diverged training loss).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Augmentation could not produce a valid sample within the retry budget.
class AugmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace irisloc

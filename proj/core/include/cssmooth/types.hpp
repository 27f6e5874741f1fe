#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cssmooth {

/// 0-based class index.
using Label = std::size_t;

/// Malformed or incompatible file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric whose denominator set is empty (e.g. no cost-sensitive examples).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace cssmooth

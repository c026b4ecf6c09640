#pragma once

#include <stdexcept>
#include <string>

namespace qrelay {

/// Argument outside the domain of an operation.
class invalid_parameter : public std::invalid_argument {
 public:
  explicit invalid_parameter(const std::string& what) : std::invalid_argument(what) {}
};

/// The link accepts no events at all (P(total) = 0).
class degenerate_link : public std::domain_error {
 public:
  explicit degenerate_link(const std::string& what) : std::domain_error(what) {}
};

/// A Monte Carlo sample with no accepted events cannot estimate a visibility.
class degenerate_sample : public std::domain_error {
 public:
  explicit degenerate_sample(const std::string& what) : std::domain_error(what) {}
};

class no_key_possible : public std::domain_error {
 public:
  explicit no_key_possible(const std::string& what) : std::domain_error(what) {}
};

class unsupported_reconciliation : public std::invalid_argument {
 public:
  explicit unsupported_reconciliation(const std::string& what)
      : std::invalid_argument(what) {}
};

/// Detector line evaluated where the dark-count probability leaves [0, 0.5).
class out_of_model : public std::domain_error {
 public:
  explicit out_of_model(const std::string& what) : std::domain_error(what) {}
};

}  // namespace qrelay

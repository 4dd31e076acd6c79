#pragma once

#include <stdexcept>
#include <string>

namespace qsnap {

// Argument and precondition failures use std::invalid_argument directly.
// The types below cover the remaining failure classes.

/// Filesystem failure while reading or writing a store or report.
class storage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested snapshot identifier does not exist in the store.
class not_found_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stored body does not hash to its identifier, or has a malformed layout.
class integrity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physically valid parameters outside the supported model range
/// (thermal relaxation with T2 > T1).
class unsupported_regime : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace qsnap

#pragma once

#include <stdexcept>
#include <string>

namespace dbell {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or missing input (files, descriptors, configuration).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured resource cap (tree depth, sample count) was exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constructed object violates an invariant it is supposed to satisfy by
/// construction (dynamics identities, hierarchy geometry, Carleson bounds).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical machinery failed (bracketing, non-convergence).
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dbell

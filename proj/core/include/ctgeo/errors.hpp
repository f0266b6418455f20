#pragma once

#include <stdexcept>
#include <string>

namespace ctgeo {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A precondition on a numeric or count parameter was violated.
class InvalidParameter : public Error {
  public:
    using Error::Error;
};

/// Dehomogenization hit |v| <= kDivEpsilon.
class DegenerateRay : public Error {
  public:
    using Error::Error;
};

/// Array shapes that must agree do not.
class ShapeMismatch : public Error {
  public:
    using Error::Error;
};

/// Malformed or inconsistent file content.
class FormatError : public Error {
  public:
    using Error::Error;
};

class TruncatedPayload : public FormatError {
  public:
    using FormatError::FormatError;
};

class UnsupportedVersion : public FormatError {
  public:
    using FormatError::FormatError;
};

} // namespace ctgeo

#pragma once

#include <stdexcept>
#include <string>

namespace warptrack {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Blend of dual quaternions whose real part collapsed (all-antipodal or zero).
struct DegenerateBlend : Error {
  using Error::Error;
};

/// Matrix passed to from_matrix is not a rigid transform.
struct NonRigidMatrix : Error {
  using Error::Error;
};

/// Subdivision input has an edge with more than two incident faces.
struct NonManifold : Error {
  using Error::Error;
};

/// Cholesky factorization of the damped normal equations failed.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

/// File could not be parsed at all (syntax, missing fields).
struct ParseError : Error {
  using Error::Error;
};

/// File parsed but violates a model invariant; message names the entity.
struct ValidationError : Error {
  using Error::Error;
};

/// File declares an unsupported schema version.
struct VersionError : Error {
  using Error::Error;
};

/// Binary stream ended before the declared frame count.
struct TruncatedFile : Error {
  using Error::Error;
};

/// Sequence header disagrees with expectations (magic, dimensions).
struct HeaderMismatch : Error {
  using Error::Error;
};

/// Generic I/O failure (open/write).
struct IoError : Error {
  using Error::Error;
};

/// Paired containers have different lengths.
struct LengthMismatch : Error {
  using Error::Error;
};

}  // namespace warptrack

#pragma once

#include <stdexcept>
#include <string>

namespace acsc {

// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension/layout mismatch between containers.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid scalar argument: even filter size, negative threshold or lambda,
// mask entries outside {0,1}, alpha outside [0,1], ...
class ValueError : public Error {
 public:
  using Error::Error;
};

// Input too small for the requested operation (metric windows etc).
class SizeError : public Error {
 public:
  using Error::Error;
};

// A materialization would exceed a configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Unrecognized file magic or version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Recognized file that is truncated or fails its checksum.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Unusable data set (e.g. empty corpus).
class DataError : public Error {
 public:
  using Error::Error;
};

// OS-level I/O failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace acsc

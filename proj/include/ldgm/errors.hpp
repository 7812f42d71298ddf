#pragma once

#include <stdexcept>
#include <string>

namespace ldgm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidNodeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Activation is not smooth enough for the requested derivative order.
class SmoothnessError : public Error {
 public:
  using Error::Error;
};

/// Derivative order exceeds the jet cap.
class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

/// PDE order too low for the requested rewrite.
class OrderError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class UnavailableError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ldgm

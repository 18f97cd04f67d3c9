#pragma once

#include <stdexcept>
#include <string>

namespace silofl {

// Base type for all protocol and configuration failures raised by this
// library. Catching silofl::Error catches everything below.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class CodecMismatch : public Error {
 public:
  using Error::Error;
};

class MissingPeerSeed : public Error {
 public:
  using Error::Error;
};

// A synchronous round did not receive the expected set of messages.
// Neither summation protocol recovers from dropouts; the round aborts.
class IncompleteRound : public Error {
 public:
  using Error::Error;
};

class DegenerateCollusion : public Error {
 public:
  using Error::Error;
};

class UnachievableBudget : public Error {
 public:
  using Error::Error;
};

class DecryptionFailure : public Error {
 public:
  using Error::Error;
};

class BatchTooLarge : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ClipViolation : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class UnknownBehavior : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TransportTimeout : public Error {
 public:
  using Error::Error;
};

}  // namespace silofl

#pragma once

#include <stdexcept>
#include <string>

namespace geoseg {

// Base for every domain error raised by the library. Argument and
// precondition violations use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

class GroundingDegenerateError : public Error {
 public:
  using Error::Error;
};

class GroundingParseError : public Error {
 public:
  using Error::Error;
};

class BackendUnavailableError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class StubMissError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class CompositionError : public Error {
 public:
  using Error::Error;
};

class JudgeParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace geoseg

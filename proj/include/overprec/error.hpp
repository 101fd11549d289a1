#pragma once

#include <stdexcept>
#include <string>

namespace overprec {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

class AuthError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace overprec

#pragma once

#include <stdexcept>
#include <string>

namespace olinear {

/// Broad failure classes. The command-line tool maps these onto exit codes.
enum class ErrorKind {
  shape,        // tensor dimensions disagree
  input,        // a numeric precondition on an argument is violated
  convergence,  // an iterative routine hit its cap
  data,         // ingestion, windowing or estimation from a dataset failed
  config,       // a configuration value is missing, unknown or invalid
  numerical,    // non-finite values appeared during computation
  state,        // an object was used out of protocol (stale cache, ...)
  io,           // file could not be read or written, or was malformed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define OLINEAR_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

OLINEAR_DEFINE_ERROR(ShapeError, shape)
OLINEAR_DEFINE_ERROR(InputError, input)
OLINEAR_DEFINE_ERROR(ConvergenceError, convergence)
OLINEAR_DEFINE_ERROR(DataError, data)
OLINEAR_DEFINE_ERROR(ConfigError, config)
OLINEAR_DEFINE_ERROR(NumericalError, numerical)
OLINEAR_DEFINE_ERROR(StateError, state)
OLINEAR_DEFINE_ERROR(IoError, io)

#undef OLINEAR_DEFINE_ERROR

}  // namespace olinear

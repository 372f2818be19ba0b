#pragma once

#include <stdexcept>
#include <string>

namespace cennforge {

// Error taxonomy; mirrored one-to-one by the cnf_status codes of the C API.
enum class ErrorCode {
  InvalidArgument,
  Parse,
  Shape,
  Io,
  Instability,
  ModelDomain,
  Capacity,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline Error invalid_argument_error(const std::string& w) { return Error(ErrorCode::InvalidArgument, w); }
inline Error parse_error(const std::string& w) { return Error(ErrorCode::Parse, w); }
inline Error shape_error(const std::string& w) { return Error(ErrorCode::Shape, w); }
inline Error io_error(const std::string& w) { return Error(ErrorCode::Io, w); }
inline Error capacity_error(const std::string& w) { return Error(ErrorCode::Capacity, w); }
inline Error model_domain_error(const std::string& w) { return Error(ErrorCode::ModelDomain, w); }

// Thrown by the integrators when a state leaves the blow-up bound.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, long step)
      : Error(ErrorCode::Instability, what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace cennforge

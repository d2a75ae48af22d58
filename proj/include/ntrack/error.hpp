#pragma once

#include <stdexcept>
#include <string>

namespace ntrack {

enum class ErrorCode {
  kInvalidInput = 1,
  kBehindCamera,
  kEmptyMesh,
  kUnsupportedPoint,
  kUnderdetermined,
  kSingularSystem,
  kDivergence,
  kIo,
  kGeneration,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this exception; the C API maps
// the code onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ntrack

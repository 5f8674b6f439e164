#ifndef TOPDOWN_ERRORS_H_
#define TOPDOWN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace topdown {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kData = 2,
  kSolver = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration or an inconsistent plan.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ExitCode::kValidation, message) {}
};

// Input data that violates the schema, the spine or a constraint.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ExitCode::kData, message) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& message)
      : Error(ExitCode::kSolver, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ExitCode::kIo, message) {}
};

}  // namespace topdown

#endif  // TOPDOWN_ERRORS_H_

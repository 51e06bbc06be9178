#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sts {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated a shape or length precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class StabilityError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered. `timestep` is the offending index within the
// evaluated sequence, or -1 when the failure is not tied to a timestep.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::int64_t timestep = -1)
      : Error(timestep < 0 ? what : what + " at timestep " + std::to_string(timestep)),
        timestep_(timestep) {}

  std::int64_t timestep() const noexcept { return timestep_; }

 private:
  std::int64_t timestep_;
};

// Malformed binary or text input. `field` names the offending field and
// `offset` the byte offset where it was read (or -1 when unknown).
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& what, std::int64_t offset = -1)
      : Error(field + ": " + what +
              (offset < 0 ? std::string{} : " (byte offset " + std::to_string(offset) + ")")),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const noexcept { return field_; }
  std::int64_t offset() const noexcept { return offset_; }

 private:
  std::string field_;
  std::int64_t offset_;
};

}  // namespace sts

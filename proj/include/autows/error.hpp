#pragma once

#include <stdexcept>
#include <string>

namespace autows {

// Base error for invalid input, violated preconditions and numerical failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A method cannot be applied to a feature representation or task.
// `code` is the machine-readable reason, e.g. "logit_width" or "pool_too_small".
class IncompatibleError : public Error {
 public:
  IncompatibleError(std::string code, const std::string& what)
      : Error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace autows

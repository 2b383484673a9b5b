#pragma once

#include <stdexcept>
#include <string>

namespace kmt {

// Base class for all errors raised by the library. The CLI maps these to
// exit code 2 (data error); anything else is a bug.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kmt

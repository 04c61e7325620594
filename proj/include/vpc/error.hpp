#pragma once

#include <stdexcept>
#include <string>

namespace vpc {

// Base of every error raised by the library. Subclasses carry the
// structured fields callers need to react (line numbers, ids, statuses).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vpc

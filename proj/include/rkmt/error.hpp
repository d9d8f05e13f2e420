#pragma once

#include <stdexcept>

namespace rkmt {

// Invalid user-supplied data: malformed files, out-of-range arguments,
// non-finite values. Anything else escaping the library is an internal fault.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rkmt

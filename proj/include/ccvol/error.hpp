#pragma once

#include <stdexcept>
#include <string>

namespace ccvol {

// Invalid arguments, malformed or unreadable inputs. The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Failures writing outputs. The CLI maps these to exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ccvol

#pragma once

#include <stdexcept>
#include <string>

namespace raglen {

// Validation failures map to CLI exit code 1, backend failures to 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
};

void log_warn(const std::string& msg);

}  // namespace raglen

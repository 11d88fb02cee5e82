#pragma once

#include <stdexcept>
#include <string>

namespace kolmo {

/// Failure category. The CLI maps these onto exit codes.
enum class ErrorKind {
    validation,  // bad input: shapes, ranges, caps, inadmissible controls
    numerical,   // the computation itself broke down
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorKind::validation, msg);
}

[[noreturn]] inline void numerical_failure(const std::string& msg) {
    throw Error(ErrorKind::numerical, msg);
}

}  // namespace kolmo

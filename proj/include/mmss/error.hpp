#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mmss {

// Error category, mirrored by the C API status codes.
enum class ErrorKind {
    Shape,     // tensor dimension mismatch
    Contract,  // precondition violated by the caller
    Data,      // malformed manifest / feature file / checkpoint
    Io,        // filesystem failure
    Usage,     // invalid configuration
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_shape(const std::string& msg) { throw Error(ErrorKind::Shape, msg); }
[[noreturn]] inline void throw_contract(const std::string& msg) { throw Error(ErrorKind::Contract, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }

}  // namespace mmss

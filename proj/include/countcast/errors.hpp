#pragma once

#include <stdexcept>
#include <string>

namespace countcast {

// Exit codes used by the CLI: 0 success, 1 usage, 2 data, 3 numeric.
enum class ExitCode : int {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Numeric = 3,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const { return code_; }

private:
    ExitCode code_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ExitCode::Usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::Data, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ExitCode::Numeric, what) {}
};

}  // namespace countcast

#pragma once

#include <stdexcept>
#include <string>

namespace elc {

// Error categories. The CLI maps these to distinct exit codes
// (see tools/elc.cpp): config=2, io=3, numeric=4, decode=5.
enum class ErrorKind {
    Config,
    Io,
    Numeric,
    Decode,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

// Bitstream parsing/decoding failures. Never silent: a truncated or
// corrupt stream must surface as this, not as wrong output.
struct DecodeError : Error {
    explicit DecodeError(const std::string& msg) : Error(ErrorKind::Decode, msg) {}
};

// Tensor/layer dimension mismatches. These are contract violations of
// the numeric engine, hence ErrorKind::Numeric.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

} // namespace elc

#pragma once

#include <stdexcept>
#include <string>

namespace lsi {

enum class ErrorCode {
    invalid_argument,
    io,
    parse,
    state,
    checksum,
    numeric,
    internal,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &msg) { throw Error(code, msg); }

} // namespace lsi

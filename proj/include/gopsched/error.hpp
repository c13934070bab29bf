#pragma once

#include <stdexcept>
#include <string>

namespace gopsched {

// All library failures are reported as an Error carrying a stable code
// (e.g. "MissingHeader", "BadMix") that the CLI prints verbatim.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string &detail)
        : std::runtime_error(detail.empty() ? code : code + ": " + detail), code_(std::move(code)) {}

    const std::string &code() const noexcept { return code_; }

  private:
    std::string code_;
};

// Parse errors name the first offending 1-based line of the input.
class ParseError : public Error {
  public:
    ParseError(std::string code, std::size_t line, const std::string &detail)
        : Error(std::move(code), "line " + std::to_string(line) + (detail.empty() ? "" : ": " + detail)),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

} // namespace gopsched

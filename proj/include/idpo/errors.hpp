// Error types shared across the library.
//
// Exit-code mapping for the CLI: invalid_argument / ConfigError -> 2,
// NumericError / TrainingError / FormatError -> 3.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idpo {

// A value left the representable/finite domain (NaN, Inf, log of a
// nonpositive number, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed binary file (checkpoint or pair dataset). Carries the byte
// offset at which parsing stopped and the section that was being read.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t byte_offset, std::string section)
        : std::runtime_error(what + " (section '" + section + "', byte offset " +
                             std::to_string(byte_offset) + ")"),
          offset(byte_offset),
          section_name(std::move(section)) {}

    std::size_t offset;
    std::string section_name;
};

// An operation was called in the wrong order (e.g. backward without a
// recorded forward pass).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

// Training diverged. Remembers the last step that produced a finite loss.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, long last_good)
        : std::runtime_error(what + " (last good step " + std::to_string(last_good) + ")"),
          last_good_step(last_good) {}

    long last_good_step;
};

// Bad config file or bad key value. Carries the 1-based line number when
// the problem is tied to a specific line (0 otherwise).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, int line_no = 0)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what
                                         : what),
          line(line_no) {}

    int line;
};

} // namespace idpo

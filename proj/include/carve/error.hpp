#pragma once

#include <stdexcept>
#include <string>

namespace carve {

// File parsing / serialization failures. Messages carry the offending path
// and, for text formats, the 1-based line number.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A domain type violated one of its documented invariants.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation's precondition does not hold (caller bug or degenerate input);
// the message names the operation and the violated condition.
struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace carve

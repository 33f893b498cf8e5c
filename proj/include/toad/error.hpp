#pragma once

#include <stdexcept>
#include <string>

namespace toad {

/// Malformed or inconsistent input data (CSV parsing, label ranges, splits).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument to a model, trainer or evaluation routine.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while decoding a packed model. Carries the section and the bit
/// offset at which decoding stopped.
class DecodeError : public std::runtime_error {
public:
    DecodeError(std::string section, std::size_t bit_offset, const std::string& what)
        : std::runtime_error(what + " (section " + section + ", bit offset " +
                             std::to_string(bit_offset) + ")"),
          section_(std::move(section)),
          bit_offset_(bit_offset) {}

    const std::string& section() const noexcept { return section_; }
    std::size_t bit_offset() const noexcept { return bit_offset_; }

private:
    std::string section_;
    std::size_t bit_offset_;
};

/// Raised by the encoder when an ensemble violates a layout constraint.
class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace toad

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "toad/error.hpp"

namespace toad {

/// Appends fields most-significant bit first.
class BitWriter {
public:
    void write(std::uint64_t value, int bits) {
        for (int b = bits - 1; b >= 0; --b) put_bit(static_cast<unsigned>((value >> b) & 1u));
    }

    /// Zero-pads to the next byte boundary.
    void align() {
        while (bit_length_ % 8 != 0) put_bit(0);
    }

    std::size_t bit_length() const { return bit_length_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> take() && { return std::move(bytes_); }

private:
    void put_bit(unsigned bit) {
        if (bit_length_ % 8 == 0) bytes_.push_back(0);
        if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bit_length_ % 8));
        ++bit_length_;
    }

    std::vector<std::uint8_t> bytes_;
    std::size_t bit_length_ = 0;
};

/// Reads fields written by BitWriter. Running past the end raises a
/// DecodeError naming the current section.
class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void set_section(std::string name) { section_ = std::move(name); }
    const std::string& section() const { return section_; }

    std::uint64_t read(int bits) {
        if (position_ + static_cast<std::size_t>(bits) > bytes_.size() * 8) {
            throw DecodeError(section_, position_, "truncated stream");
        }
        std::uint64_t value = 0;
        for (int b = 0; b < bits; ++b) {
            const std::size_t p = position_++;
            value = (value << 1) | ((bytes_[p / 8] >> (7 - p % 8)) & 1u);
        }
        return value;
    }

    void align() { position_ = (position_ + 7) / 8 * 8; }

    std::size_t position() const { return position_; }
    std::size_t bit_size() const { return bytes_.size() * 8; }

    [[noreturn]] void fail(const std::string& what) const { throw DecodeError(section_, position_, what); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t position_ = 0;
    std::string section_;
};

}  // namespace toad

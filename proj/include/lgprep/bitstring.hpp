#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lgprep/error.hpp"

namespace lgprep {

// Ordered sequence of classical bits. Bit value 0 is the sigma^z = +1
// eigenstate, bit value 1 is sigma^z = -1. Position k corresponds to bit k of
// the computational-basis index (little-endian), so qubit 0 is the least
// significant bit of `to_index()`.
class BitString {
 public:
  BitString() = default;

  explicit BitString(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.empty()) throw Error(ErrorKind::ShapeMismatch, "bit string must be non-empty");
    for (auto b : bits_) {
      if (b > 1) throw Error(ErrorKind::ShapeMismatch, "bit values must be 0 or 1");
    }
  }

  static BitString parse(std::string_view text) {
    std::vector<std::uint8_t> bits;
    bits.reserve(text.size());
    for (char c : text) {
      if (c != '0' && c != '1') {
        throw Error(ErrorKind::ParseError, "invalid character in bit string '" + std::string(text) + "'");
      }
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return BitString(std::move(bits));
  }

  static BitString from_index(std::uint64_t index, std::size_t length) {
    std::vector<std::uint8_t> bits(length);
    for (std::size_t k = 0; k < length; ++k) bits[k] = static_cast<std::uint8_t>((index >> k) & 1U);
    return BitString(std::move(bits));
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  // sigma^z eigenvalue of position i.
  int spin(std::size_t i) const { return bits_[i] ? -1 : 1; }

  std::uint64_t to_index() const {
    if (bits_.size() > 63) throw Error(ErrorKind::TooLarge, "bit string too long for a basis index");
    std::uint64_t index = 0;
    for (std::size_t k = 0; k < bits_.size(); ++k) index |= static_cast<std::uint64_t>(bits_[k]) << k;
    return index;
  }

  BitString flipped(std::size_t i) const {
    BitString out = *this;
    out.bits_.at(i) ^= 1U;
    return out;
  }

  BitString complement() const {
    BitString out = *this;
    for (auto& b : out.bits_) b ^= 1U;
    return out;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  auto operator<=>(const BitString&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline std::size_t hamming(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "hamming distance needs equal lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]) ? 1U : 0U;
  return d;
}

// Positions at which two equal-length strings differ, ascending.
inline std::vector<std::size_t> differing_positions(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "length mismatch");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) out.push_back(i);
  }
  return out;
}

}  // namespace lgprep

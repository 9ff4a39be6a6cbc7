#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tilelane {

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian packing of numeric arrays.
template <typename T>
std::string encode_array(const std::vector<T>& values) {
  return base64_encode(reinterpret_cast<const std::uint8_t*>(values.data()), values.size() * sizeof(T));
}

template <typename T>
std::vector<T> decode_array(std::string_view text) {
  const std::vector<std::uint8_t> bytes = base64_decode(text);
  if (bytes.size() % sizeof(T) != 0) throw std::invalid_argument("base64 array: truncated element");
  std::vector<T> out(bytes.size() / sizeof(T));
  std::copy(bytes.begin(), bytes.begin() + out.size() * sizeof(T), reinterpret_cast<std::uint8_t*>(out.data()));
  return out;
}

}  // namespace tilelane

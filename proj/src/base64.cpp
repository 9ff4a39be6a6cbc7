#include "tilelane/base64.hpp"

#include <bit>
#include <stdexcept>

namespace tilelane {

static_assert(std::endian::native == std::endian::little, "array packing assumes little-endian");

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  std::size_t k = 0;
  for (; k + 2 < size; k += 3) {
    const std::uint32_t v = (data[k] << 16) | (data[k + 1] << 8) | data[k + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (k < size) {
    std::uint32_t v = data[k] << 16;
    if (k + 1 < size) v |= data[k + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += k + 1 < size ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t k = 0; k < text.size(); k += 4) {
    int v[4];
    int pad = 0;
    for (int q = 0; q < 4; ++q) {
      const char c = text[k + q];
      if (c == '=' && k + 4 == text.size() && q >= 2) {
        v[q] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw std::invalid_argument("base64: data after padding");
      v[q] = decode_char(c);
      if (v[q] < 0) throw std::invalid_argument("base64: invalid character");
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(w >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(w));
  }
  return out;
}

}  // namespace tilelane

#include <cctype>
#include <string>

#include "reconprobe/caption.hpp"

namespace reconprobe {

namespace {

// Decodes one UTF-8 code point at `pos`; malformed bytes decode as themselves.
char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& length) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  const auto cont = [&](std::size_t i) {
    return pos + i < s.size() && (static_cast<unsigned char>(s[pos + i]) & 0xC0) == 0x80;
  };
  const auto bits = [&](std::size_t i) { return static_cast<char32_t>(static_cast<unsigned char>(s[pos + i]) & 0x3F); };
  if (b0 < 0x80) {
    length = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    length = 2;
    return (static_cast<char32_t>(b0 & 0x1F) << 6) | bits(1);
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    length = 3;
    return (static_cast<char32_t>(b0 & 0x0F) << 12) | (bits(1) << 6) | bits(2);
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    length = 4;
    return (static_cast<char32_t>(b0 & 0x07) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3);
  }
  length = 1;
  return b0;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  switch (cp) {
    case 0xA1: case 0xAB: case 0xBB: case 0xBF:              // inverted marks, guillemets
    case 0x2013: case 0x2014: case 0x2018: case 0x2019:      // dashes, single quotes
    case 0x201C: case 0x201D: case 0x2026: case 0x3001: case 0x3002:
      return true;
    default:
      return false;
  }
}

struct CodePoint {
  std::size_t pos;
  std::size_t length;
  char32_t value;
};

std::string finish_token(std::string_view text, const std::vector<CodePoint>& cps) {
  std::size_t begin = 0, end = cps.size();
  while (begin < end && is_punct(cps[begin].value)) ++begin;
  while (end > begin && is_punct(cps[end - 1].value)) --end;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (cps[i].value < 0x80) out += static_cast<char>(std::tolower(static_cast<int>(cps[i].value)));
    else out.append(text.substr(cps[i].pos, cps[i].length));
  }
  return out;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::vector<CodePoint> current;
  const auto flush = [&] {
    if (current.empty()) return;
    if (auto tok = finish_token(text, current); !tok.empty()) tokens.push_back(std::move(tok));
    current.clear();
  };
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t len = 1;
    const char32_t cp = decode_utf8(text, pos, len);
    if (is_space(cp)) flush();
    else current.push_back({pos, len, cp});
    pos += len;
  }
  flush();
  return tokens;
}

}  // namespace reconprobe

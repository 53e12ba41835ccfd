// Copyright 2026 The Micrometry Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Embedded 5x7 glyphs for scale-bar labels. Rendering is integer-only so
// generated images are byte-identical on every platform.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "micrometry/error.hpp"

namespace micrometry::font {

inline constexpr int kGlyphW = 5;
inline constexpr int kGlyphH = 7;
inline constexpr int kAdvance = 6;  // glyph width plus one column of spacing

struct Glyph {
  char32_t code;
  std::array<std::uint8_t, kGlyphH> rows;  // bit 4 = leftmost column
};

inline const std::vector<Glyph>& glyphs() {
  static const std::vector<Glyph> table = {
      {U'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
      {U'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {U'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
      {U'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
      {U'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
      {U'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
      {U'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
      {U'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
      {U'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
      {U'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
      {U'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100}},
      {U' ', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000}},
      {U'n', {0b00000, 0b00000, 0b10110, 0b11001, 0b10001, 0b10001, 0b10001}},
      {U'm', {0b00000, 0b00000, 0b11010, 0b10101, 0b10101, 0b10001, 0b10001}},
      {U'u', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b10011, 0b01101}},
      {U'µ', {0b00000, 0b00000, 0b10001, 0b10001, 0b10011, 0b11101, 0b10000}},
      {U'μ', {0b00000, 0b00000, 0b10001, 0b10001, 0b10011, 0b11101, 0b10000}},
      {U'c', {0b00000, 0b00000, 0b01110, 0b10000, 0b10000, 0b10001, 0b01110}},
      {U'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
      {U'Å', {0b00100, 0b01010, 0b00100, 0b01110, 0b10001, 0b11111, 0b10001}},
  };
  return table;
}

inline const Glyph& glyph(char32_t c) {
  for (const auto& g : glyphs()) {
    if (g.code == c) return g;
  }
  throw Error(ErrorCode::invalid_argument, "no glyph for code point " + std::to_string(c));
}

inline std::u32string decode_utf8(const std::string& s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp;
    int len;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      len = 3;
    } else {
      cp = c & 0x07;
      len = 4;
    }
    if (i + len > s.size()) throw Error(ErrorCode::invalid_argument, "truncated UTF-8");
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline int text_width(const std::string& text, int scale) {
  const auto n = static_cast<int>(decode_utf8(text).size());
  return n == 0 ? 0 : (n * kAdvance - 1) * scale;
}

inline int text_height(int scale) { return kGlyphH * scale; }

// Calls plot(y, x) for every lit pixel of the text with its top-left corner
// at (top, left), each glyph cell magnified by an integer scale.
template <typename Plot>
void render_text(const std::string& text, int top, int left, int scale, Plot&& plot) {
  int pen = left;
  for (char32_t cp : decode_utf8(text)) {
    const Glyph& g = glyph(cp);
    for (int r = 0; r < kGlyphH; ++r) {
      for (int c = 0; c < kGlyphW; ++c) {
        if (!((g.rows[r] >> (kGlyphW - 1 - c)) & 1)) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) plot(top + r * scale + sy, pen + c * scale + sx);
        }
      }
    }
    pen += kAdvance * scale;
  }
}

}  // namespace micrometry::font

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace synorm::utf8 {

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at
// a time so that arbitrary input never throws.
std::vector<char32_t> decode(std::string_view s);

void append(std::string& out, char32_t cp);

std::string encode(const std::vector<char32_t>& cps);

// Byte offsets of each code point start, plus a final entry equal to s.size().
std::vector<std::size_t> boundaries(std::string_view s);

// Unicode general category P (punctuation), for the ranges that occur in
// biomedical text: ASCII, Latin-1, General Punctuation, CJK symbols, and
// full-width forms.
bool is_punctuation(char32_t cp);

bool is_space(char32_t cp);

// Simple lowercase mapping for ASCII, Latin-1, Latin Extended-A and basic
// Greek/Cyrillic. Other code points pass through unchanged.
char32_t to_lower(char32_t cp);

}  // namespace synorm::utf8

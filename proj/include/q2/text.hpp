#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace q2 {

std::string_view trim(std::string_view s);

// ASCII-only lowercasing; bytes >= 0x80 pass through untouched.
std::string lowercase_ascii(std::string_view s);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

// Lowercased runs of ASCII letters/digits (plus any non-ASCII bytes). Used for
// whole-token keyword checks: "I'm" -> {"i", "m"}.
std::vector<std::string> word_tokens(std::string_view s);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

} // namespace q2

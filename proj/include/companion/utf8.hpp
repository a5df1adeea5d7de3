#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace companion::utf8 {

/// Decodes UTF-8 into code points. Invalid sequences decode byte-by-byte to U+FFFD.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);

/// Number of code points, with the same invalid-byte rule as decode().
std::size_t length(std::string_view text);

} // namespace companion::utf8

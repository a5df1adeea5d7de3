#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace companion::markup {

struct Block {
    enum class Kind { Heading, Paragraph, Figure };

    Kind kind = Kind::Paragraph;
    int level = 0; // headings only
    std::string text;
};

std::vector<Block> parse_markdown(std::string_view doc);
std::vector<Block> parse_html(std::string_view doc);

// Collapses whitespace runs to single spaces and trims.
std::string squash_whitespace(std::string_view text);

} // namespace companion::markup

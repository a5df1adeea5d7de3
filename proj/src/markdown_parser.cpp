#include <cctype>
#include <optional>

#include "companion/content_indexer.hpp"
#include "markup.hpp"

namespace companion::markup {

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

std::size_t leading_spaces(std::string_view line)
{
    std::size_t n = 0;
    while (n < line.size() && line[n] == ' ')
        ++n;
    return n;
}

bool is_word_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || static_cast<unsigned char>(c) >= 0x80;
}

// Finds the ')' closing a link destination that starts at `open` (which holds '(').
std::size_t closing_paren(std::string_view s, std::size_t open)
{
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == '(')
            ++depth;
        else if (s[i] == ')' && --depth == 0)
            return i;
    }
    return std::string_view::npos;
}

// Finds the ']' matching the '[' at `open`.
std::size_t closing_bracket(std::string_view s, std::size_t open)
{
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
            continue;
        }
        if (s[i] == '[')
            ++depth;
        else if (s[i] == ']' && --depth == 0)
            return i;
    }
    return std::string_view::npos;
}

// Reduces inline Markdown to the text a reader sees.
std::string strip_inline(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\\' && i + 1 < s.size() && std::ispunct(static_cast<unsigned char>(s[i + 1]))) {
            out.push_back(s[++i]);
            continue;
        }
        if (c == '!' && i + 1 < s.size() && s[i + 1] == '[') {
            continue; // image marker; the bracket text (alt) is kept below
        }
        if (c == '[') {
            const auto close = closing_bracket(s, i);
            if (close != std::string_view::npos) {
                out += strip_inline(s.substr(i + 1, close - i - 1));
                std::size_t next = close + 1;
                if (next < s.size() && s[next] == '(') {
                    const auto paren = closing_paren(s, next);
                    if (paren != std::string_view::npos)
                        next = paren + 1;
                } else if (next < s.size() && s[next] == '[') {
                    const auto ref = closing_bracket(s, next);
                    if (ref != std::string_view::npos)
                        next = ref + 1;
                }
                if (next < s.size() && s[next] == '{') {
                    const auto attr = s.find('}', next);
                    if (attr != std::string_view::npos)
                        next = attr + 1;
                }
                i = next - 1;
                continue;
            }
        }
        if (c == '<') {
            // autolinks and inline html tags
            const auto close = s.find('>', i);
            if (close != std::string_view::npos) {
                const auto inner = s.substr(i + 1, close - i - 1);
                if (inner.find("://") != std::string_view::npos || inner.find('@') != std::string_view::npos) {
                    if (inner.find(' ') == std::string_view::npos) {
                        out.append(inner);
                        i = close;
                        continue;
                    }
                }
                if (!inner.empty() && (std::isalpha(static_cast<unsigned char>(inner[0])) || inner[0] == '/')) {
                    i = close;
                    continue;
                }
            }
        }
        if (c == '*' || c == '`' || c == '~')
            continue;
        if (c == '_') {
            const bool left_word = i > 0 && is_word_char(s[i - 1]);
            const bool right_word = i + 1 < s.size() && is_word_char(s[i + 1]);
            if (!(left_word && right_word))
                continue;
        }
        out.push_back(c);
    }
    return out;
}

std::optional<Block> atx_heading(std::string_view line)
{
    if (leading_spaces(line) > 3)
        return std::nullopt;
    auto s = trim(line);
    int level = 0;
    while (level < static_cast<int>(s.size()) && s[level] == '#')
        ++level;
    if (level == 0 || level > 6)
        return std::nullopt;
    if (static_cast<std::size_t>(level) < s.size() && !is_space(s[level]))
        return std::nullopt;
    auto text = trim(s.substr(level));
    // optional closing sequence
    auto end = text.size();
    while (end > 0 && text[end - 1] == '#')
        --end;
    if (end == 0 || is_space(text[end - 1]))
        text = trim(text.substr(0, end));
    // Pandoc/Quarto attribute block: "# Title {#sec-id}"
    if (!text.empty() && text.back() == '}') {
        const auto open = text.rfind('{');
        if (open != std::string_view::npos && (open == 0 || is_space(text[open - 1])))
            text = trim(text.substr(0, open));
    }
    return Block{Block::Kind::Heading, level, squash_whitespace(strip_inline(text))};
}

bool is_rule(std::string_view line, char marker)
{
    if (leading_spaces(line) > 3)
        return false;
    std::size_t count = 0;
    for (char c : trim(line)) {
        if (c == marker)
            ++count;
        else if (c != ' ' && c != '\t')
            return false;
    }
    return count >= 3;
}

bool is_setext_underline(std::string_view line, char marker)
{
    if (leading_spaces(line) > 3)
        return false;
    auto s = trim(line);
    if (s.empty())
        return false;
    for (char c : s)
        if (c != marker)
            return false;
    return true;
}

// Returns the content after a list marker, or nullopt when the line is not a list item.
std::optional<std::string_view> list_item(std::string_view line)
{
    auto s = line;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    if (s.size() >= 2 && (s[0] == '-' || s[0] == '*' || s[0] == '+') && is_space(s[1]))
        return trim(s.substr(2));
    std::size_t digits = 0;
    while (digits < s.size() && digits < 9 && std::isdigit(static_cast<unsigned char>(s[digits])))
        ++digits;
    if (digits > 0 && digits + 1 < s.size() && (s[digits] == '.' || s[digits] == ')') && is_space(s[digits + 1]))
        return trim(s.substr(digits + 2));
    return std::nullopt;
}

// A line holding only an image, optionally followed by an attribute block.
std::optional<std::string> figure_line(std::string_view line)
{
    auto s = trim(line);
    if (s.size() < 5 || s[0] != '!' || s[1] != '[')
        return std::nullopt;
    const auto close = closing_bracket(s, 1);
    if (close == std::string_view::npos || close + 1 >= s.size() || s[close + 1] != '(')
        return std::nullopt;
    const auto paren = closing_paren(s, close + 1);
    if (paren == std::string_view::npos)
        return std::nullopt;
    auto rest = trim(s.substr(paren + 1));
    if (!rest.empty() && !(rest.front() == '{' && rest.back() == '}'))
        return std::nullopt;
    return squash_whitespace(strip_inline(s.substr(2, close - 2)));
}

std::string_view strip_blockquote(std::string_view line)
{
    auto s = line;
    for (;;) {
        const auto spaces = leading_spaces(s);
        if (spaces <= 3 && spaces < s.size() && s[spaces] == '>') {
            s.remove_prefix(spaces + 1);
            if (!s.empty() && s.front() == ' ')
                s.remove_prefix(1);
        } else {
            return s;
        }
    }
}

// Splits into lines and removes HTML comments, which may span lines.
std::vector<std::string> decomment(std::string_view doc, std::vector<std::size_t>& line_numbers)
{
    std::string cleaned;
    cleaned.reserve(doc.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (doc.compare(i, 4, "<!--") == 0) {
            const auto end = doc.find("-->", i + 4);
            if (end == std::string_view::npos) {
                std::size_t col = 1;
                for (std::size_t j = i; j > 0 && doc[j - 1] != '\n'; --j)
                    ++col;
                throw MarkupError("unterminated HTML comment", line, col);
            }
            for (std::size_t j = i; j < end + 3; ++j)
                if (doc[j] == '\n') {
                    cleaned.push_back('\n');
                    ++line;
                }
            i = end + 2;
            continue;
        }
        if (doc[i] == '\n')
            ++line;
        cleaned.push_back(doc[i]);
    }

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= cleaned.size()) {
        auto end = cleaned.find('\n', start);
        if (end == std::string::npos)
            end = cleaned.size();
        std::string l = cleaned.substr(start, end - start);
        if (!l.empty() && l.back() == '\r')
            l.pop_back();
        lines.push_back(std::move(l));
        line_numbers.push_back(lines.size());
        start = end + 1;
    }
    return lines;
}

} // namespace

std::string squash_whitespace(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending = false;
    for (char c : text) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending)
            out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

std::vector<Block> parse_markdown(std::string_view doc)
{
    std::vector<std::size_t> numbers;
    const auto lines = decomment(doc, numbers);

    std::vector<Block> blocks;
    std::string para;
    bool para_open = false;

    auto flush = [&] {
        if (para_open) {
            auto text = squash_whitespace(strip_inline(para));
            if (!text.empty())
                blocks.push_back({Block::Kind::Paragraph, 0, std::move(text)});
        }
        para.clear();
        para_open = false;
    };

    std::optional<std::size_t> fence_line;
    char fence_char = 0;
    std::size_t fence_len = 0;
    std::string code;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view raw = lines[i];

        if (fence_line) {
            auto s = trim(raw);
            std::size_t n = 0;
            while (n < s.size() && s[n] == fence_char)
                ++n;
            if (n >= fence_len && n == s.size()) {
                auto text = squash_whitespace(code);
                if (!text.empty())
                    blocks.push_back({Block::Kind::Paragraph, 0, std::move(text)});
                code.clear();
                fence_line.reset();
            } else {
                code.append(raw);
                code.push_back('\n');
            }
            continue;
        }

        auto line = strip_blockquote(raw);
        const auto body = trim(line);

        if (leading_spaces(line) <= 3 && body.size() >= 3 && (body[0] == '`' || body[0] == '~')) {
            std::size_t n = 0;
            while (n < body.size() && body[n] == body[0])
                ++n;
            if (n >= 3) {
                flush();
                fence_line = numbers[i];
                fence_char = body[0];
                fence_len = n;
                continue;
            }
        }

        if (body.empty()) {
            flush();
            continue;
        }
        // Quarto/pandoc fenced divs (":::") delimit containers, not content.
        if (body.size() >= 3 && body.substr(0, 3) == ":::") {
            flush();
            continue;
        }
        if (auto heading = atx_heading(line)) {
            flush();
            blocks.push_back(std::move(*heading));
            continue;
        }
        if (para_open && is_setext_underline(line, '=')) {
            auto title = squash_whitespace(strip_inline(para));
            para.clear();
            para_open = false;
            blocks.push_back({Block::Kind::Heading, 1, std::move(title)});
            continue;
        }
        if (para_open && is_setext_underline(line, '-')) {
            auto title = squash_whitespace(strip_inline(para));
            para.clear();
            para_open = false;
            blocks.push_back({Block::Kind::Heading, 2, std::move(title)});
            continue;
        }
        if (is_rule(line, '-') || is_rule(line, '*') || is_rule(line, '_')) {
            flush();
            continue;
        }
        if (auto alt = figure_line(line)) {
            flush();
            blocks.push_back({Block::Kind::Figure, 0, std::move(*alt)});
            continue;
        }
        if (auto item = list_item(line)) {
            flush();
            para.assign(*item);
            para_open = true;
            continue;
        }
        if (para_open)
            para.push_back(' ');
        para.append(body);
        para_open = true;
    }

    if (fence_line)
        throw MarkupError("unterminated code fence", *fence_line, 1);
    flush();
    return blocks;
}

} // namespace companion::markup

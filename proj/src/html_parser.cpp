#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>

#include "companion/content_indexer.hpp"
#include "companion/utf8.hpp"
#include "markup.hpp"

namespace companion::markup {

namespace {

constexpr std::array kVoid = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                              "link", "meta", "param", "source", "track", "wbr"};

// Elements whose end tag may be omitted in well-formed HTML.
constexpr std::array kOptionalEnd = {"p", "li", "dt", "dd", "tr", "td", "th", "thead", "tbody",
                                     "tfoot", "option", "html", "body", "head", "colgroup"};

constexpr std::array kBlock = {"address", "article", "aside", "blockquote", "body", "dd", "details",
                               "div", "dl", "dt", "figcaption", "figure", "footer", "form", "header",
                               "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section",
                               "summary", "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul"};

// Content of these is never shown as body text.
constexpr std::array kSkipped = {"head", "script", "style", "template", "noscript", "svg", "math"};

template <std::size_t N>
bool among(const std::array<const char*, N>& set, std::string_view name)
{
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return name == s; });
}

int heading_level(std::string_view name)
{
    if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6')
        return name[1] - '0';
    return 0;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string decode_entity(std::string_view name)
{
    if (!name.empty() && name[0] == '#') {
        std::uint32_t cp = 0;
        try {
            if (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                cp = static_cast<std::uint32_t>(std::stoul(std::string(name.substr(2)), nullptr, 16));
            else
                cp = static_cast<std::uint32_t>(std::stoul(std::string(name.substr(1)), nullptr, 10));
        } catch (const std::exception&) {
            return {};
        }
        if (cp == 0xA0)
            return " ";
        if (cp == 0 || cp > 0x10FFFF)
            cp = 0xFFFD;
        return utf8::encode(std::u32string(1, static_cast<char32_t>(cp)));
    }
    if (name == "amp") return "&";
    if (name == "lt") return "<";
    if (name == "gt") return ">";
    if (name == "quot") return "\"";
    if (name == "apos") return "'";
    if (name == "nbsp") return " ";
    if (name == "ndash") return "\xE2\x80\x93";
    if (name == "mdash") return "\xE2\x80\x94";
    if (name == "hellip") return "\xE2\x80\xA6";
    if (name == "rsquo") return "\xE2\x80\x99";
    if (name == "lsquo") return "\xE2\x80\x98";
    if (name == "rdquo") return "\xE2\x80\x9D";
    if (name == "ldquo") return "\xE2\x80\x9C";
    if (name == "copy") return "\xC2\xA9";
    if (name == "times") return "\xC3\x97";
    return {};
}

std::string decode_entities(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '&') {
            const auto semi = text.find(';', i + 1);
            if (semi != std::string_view::npos && semi - i <= 10) {
                auto decoded = decode_entity(text.substr(i + 1, semi - i - 1));
                if (!decoded.empty()) {
                    out += decoded;
                    i = semi;
                    continue;
                }
            }
        }
        out.push_back(text[i]);
    }
    return out;
}

struct OpenElement {
    std::string name;
    std::size_t line;
    std::size_t column;
};

class HtmlReader {
public:
    explicit HtmlReader(std::string_view doc) : doc_(doc) {}

    std::vector<Block> run();

private:
    void advance_to(std::size_t target)
    {
        for (; pos_ < target; ++pos_) {
            if (doc_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
        }
    }

    [[noreturn]] void fail(const std::string& message) const { throw MarkupError(message, line_, column_); }

    void text(std::string_view raw);
    void open_tag(const std::string& name, std::string_view attrs, bool self_closing);
    void close_tag(const std::string& name);
    void boundary();
    void flush_paragraph();
    void finish_heading();
    bool skipping() const { return skip_depth_ > 0; }

    std::string_view doc_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;

    std::vector<OpenElement> stack_;
    std::vector<Block> blocks_;
    std::string paragraph_;
    std::string heading_;
    int heading_level_ = 0;
    std::string caption_;
    int figure_depth_ = 0;
    int skip_depth_ = 0;
};

std::string attribute(std::string_view attrs, std::string_view wanted)
{
    std::size_t i = 0;
    while (i < attrs.size()) {
        while (i < attrs.size() && (std::isspace(static_cast<unsigned char>(attrs[i])) || attrs[i] == '/'))
            ++i;
        const auto name_start = i;
        while (i < attrs.size() && !std::isspace(static_cast<unsigned char>(attrs[i])) && attrs[i] != '=' && attrs[i] != '/')
            ++i;
        const auto name = lower(attrs.substr(name_start, i - name_start));
        while (i < attrs.size() && std::isspace(static_cast<unsigned char>(attrs[i])))
            ++i;
        std::string value;
        if (i < attrs.size() && attrs[i] == '=') {
            ++i;
            while (i < attrs.size() && std::isspace(static_cast<unsigned char>(attrs[i])))
                ++i;
            if (i < attrs.size() && (attrs[i] == '"' || attrs[i] == '\'')) {
                const char q = attrs[i++];
                const auto end = attrs.find(q, i);
                value = std::string(attrs.substr(i, end == std::string_view::npos ? std::string_view::npos : end - i));
                i = end == std::string_view::npos ? attrs.size() : end + 1;
            } else {
                const auto start = i;
                while (i < attrs.size() && !std::isspace(static_cast<unsigned char>(attrs[i])))
                    ++i;
                value = std::string(attrs.substr(start, i - start));
            }
        }
        if (name == wanted)
            return decode_entities(value);
        if (name.empty() && i == name_start)
            ++i;
    }
    return {};
}

void HtmlReader::text(std::string_view raw)
{
    if (skipping() || raw.empty())
        return;
    auto decoded = decode_entities(raw);
    if (heading_level_ > 0)
        heading_ += decoded;
    else if (figure_depth_ > 0)
        caption_ += decoded;
    else
        paragraph_ += decoded;
}

void HtmlReader::flush_paragraph()
{
    auto squashed = squash_whitespace(paragraph_);
    paragraph_.clear();
    if (!squashed.empty())
        blocks_.push_back({Block::Kind::Paragraph, 0, std::move(squashed)});
}

void HtmlReader::boundary()
{
    if (heading_level_ == 0 && figure_depth_ == 0)
        flush_paragraph();
}

void HtmlReader::finish_heading()
{
    blocks_.push_back({Block::Kind::Heading, heading_level_, squash_whitespace(heading_)});
    heading_.clear();
    heading_level_ = 0;
}

void HtmlReader::open_tag(const std::string& name, std::string_view attrs, bool self_closing)
{
    const bool is_void = among(kVoid, name);

    if (name == "img") {
        if (!skipping()) {
            auto alt = squash_whitespace(attribute(attrs, "alt"));
            if (figure_depth_ > 0) {
                caption_ += ' ';
                caption_ += alt;
            } else {
                boundary();
                blocks_.push_back({Block::Kind::Figure, 0, std::move(alt)});
            }
        }
        return;
    }
    if (name == "br") {
        text(" ");
        return;
    }

    // Implied end tags: a new <p> closes an open <p>, a new <li> closes the open <li>, and so on.
    if (!stack_.empty()) {
        const auto& top = stack_.back().name;
        const bool implied = (name == "p" && top == "p") || (name == "li" && top == "li") ||
                             ((name == "dt" || name == "dd") && (top == "dt" || top == "dd")) ||
                             ((name == "td" || name == "th") && (top == "td" || top == "th")) ||
                             (name == "tr" && top == "tr");
        if (implied)
            close_tag(top);
        else if (top == "p" && (among(kBlock, name) || heading_level(name) > 0))
            close_tag("p");
    }

    if (!skipping()) {
        if (const int level = heading_level(name); level > 0) {
            if (heading_level_ > 0)
                fail("nested heading <" + name + ">");
            boundary();
            heading_level_ = level;
        } else if (name == "figure") {
            boundary();
            ++figure_depth_;
        } else if (among(kBlock, name)) {
            boundary();
        }
    }

    if (is_void || self_closing)
        return;
    if (among(kSkipped, name))
        ++skip_depth_;
    stack_.push_back({name, line_, column_});
}

void HtmlReader::close_tag(const std::string& name)
{
    if (among(kVoid, name))
        return;
    auto it = std::find_if(stack_.rbegin(), stack_.rend(), [&](const OpenElement& e) { return e.name == name; });
    if (it == stack_.rend())
        fail("unexpected closing tag </" + name + ">");

    while (!stack_.empty()) {
        auto top = stack_.back();
        if (top.name != name && !among(kOptionalEnd, top.name))
            fail("mismatched closing tag </" + name + ">, expected </" + top.name + ">");
        stack_.pop_back();

        if (among(kSkipped, top.name)) {
            --skip_depth_;
        } else if (!skipping()) {
            if (heading_level(top.name) > 0 && heading_level_ > 0) {
                finish_heading();
            } else if (top.name == "figure") {
                --figure_depth_;
                if (figure_depth_ == 0) {
                    blocks_.push_back({Block::Kind::Figure, 0, squash_whitespace(caption_)});
                    caption_.clear();
                }
            } else if (among(kBlock, top.name)) {
                boundary();
            }
        }
        if (top.name == name)
            break;
    }
}

std::vector<Block> HtmlReader::run()
{
    std::size_t text_start = 0;
    while (pos_ < doc_.size()) {
        if (doc_[pos_] != '<') {
            advance_to(pos_ + 1);
            continue;
        }
        const std::size_t lt = pos_;
        auto rest = doc_.substr(lt);

        if (rest.substr(0, 4) == "<!--") {
            text(doc_.substr(text_start, lt - text_start));
            const auto end = doc_.find("-->", lt + 4);
            if (end == std::string_view::npos)
                fail("unterminated comment");
            advance_to(end + 3);
            text_start = pos_;
            continue;
        }
        if (rest.substr(0, 9) == "<![CDATA[") {
            text(doc_.substr(text_start, lt - text_start));
            const auto end = doc_.find("]]>", lt + 9);
            if (end == std::string_view::npos)
                fail("unterminated CDATA section");
            if (!skipping())
                text(doc_.substr(lt + 9, end - lt - 9));
            advance_to(end + 3);
            text_start = pos_;
            continue;
        }
        if (rest.size() > 1 && (rest[1] == '!' || rest[1] == '?')) {
            text(doc_.substr(text_start, lt - text_start));
            const auto end = doc_.find('>', lt);
            if (end == std::string_view::npos)
                fail("unterminated declaration");
            advance_to(end + 1);
            text_start = pos_;
            continue;
        }

        const bool closing = rest.size() > 1 && rest[1] == '/';
        const std::size_t name_start = lt + (closing ? 2 : 1);
        if (name_start >= doc_.size() || !std::isalpha(static_cast<unsigned char>(doc_[name_start]))) {
            advance_to(pos_ + 1); // a literal '<'
            continue;
        }

        text(doc_.substr(text_start, lt - text_start));

        std::size_t i = name_start;
        while (i < doc_.size() && (std::isalnum(static_cast<unsigned char>(doc_[i])) || doc_[i] == '-' || doc_[i] == ':'))
            ++i;
        const auto name = lower(doc_.substr(name_start, i - name_start));

        // Find the end of the tag, respecting quoted attribute values.
        char quote = 0;
        std::size_t end = i;
        for (; end < doc_.size(); ++end) {
            const char c = doc_[end];
            if (quote) {
                if (c == quote)
                    quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '>') {
                break;
            } else if (c == '<') {
                fail("unterminated tag <" + name + ">");
            }
        }
        if (end >= doc_.size())
            fail("unterminated tag <" + name + ">");

        auto attrs = doc_.substr(i, end - i);
        const bool self_closing = !attrs.empty() && attrs.back() == '/';
        if (closing)
            close_tag(name);
        else
            open_tag(name, attrs, self_closing);
        advance_to(end + 1);
        text_start = pos_;

        if (!closing && !self_closing && (name == "script" || name == "style")) {
            const auto close = lower(std::string(doc_.substr(pos_))).find("</" + name);
            if (close == std::string::npos)
                fail("unterminated <" + name + "> element");
            advance_to(pos_ + close);
            text_start = pos_;
        }
    }
    text(doc_.substr(text_start));

    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
        if (!among(kOptionalEnd, it->name))
            throw MarkupError("unclosed element <" + it->name + ">", it->line, it->column);
    }
    while (!stack_.empty())
        close_tag(stack_.back().name);
    if (heading_level_ > 0)
        finish_heading();
    flush_paragraph();
    return std::move(blocks_);
}

} // namespace

std::vector<Block> parse_html(std::string_view doc)
{
    return HtmlReader(doc).run();
}

} // namespace companion::markup

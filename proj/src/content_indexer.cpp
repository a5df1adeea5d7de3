#include "companion/content_indexer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "companion/utf8.hpp"
#include "markup.hpp"

namespace companion {

using nlohmann::json;

namespace {

bool ascii_punct(unsigned char c)
{
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool ascii_space(unsigned char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string numbered(std::string_view prefix, char tag, std::size_t n)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%04zu", tag, n);
    std::string out(prefix);
    out.push_back('/');
    out += buf;
    return out;
}

std::string format_fingerprint(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

std::string quoted(const std::string& s)
{
    return json(s).dump(-1, ' ', false, json::error_handler_t::replace);
}

Paragraph make_paragraph(std::string id, std::string raw)
{
    Paragraph p;
    p.paragraph_id = std::move(id);
    p.normalized_text = normalize(raw);
    p.raw_text = std::move(raw);
    if (!p.normalized_text.empty())
        p.fingerprint = fingerprint(p.normalized_text);
    return p;
}

} // namespace

MarkupError::MarkupError(const std::string& message, std::size_t line, std::size_t column)
    : Error(Errc::malformed_markup,
            message + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
      line_(line), column_(column)
{
}

std::string normalize(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (ascii_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (ascii_punct(c))
            continue;
        if (pending_space)
            out.push_back(' ');
        pending_space = false;
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + ('a' - 'A')) : ch);
    }
    return out;
}

double fingerprint(std::string_view normalized_text)
{
    if (normalized_text.empty())
        throw Error(Errc::empty_text, "fingerprint of empty text");
    const auto points = utf8::decode(normalized_text);
    std::uint64_t sum = 0;
    for (char32_t cp : points)
        sum += cp;
    return static_cast<double>(sum) / static_cast<double>(points.size());
}

std::size_t count_tokens(std::string_view text)
{
    const auto chars = utf8::length(text);
    return (chars + 3) / 4;
}

std::string Section::full_text() const
{
    std::string out;
    for (const auto& p : paragraphs) {
        if (!out.empty())
            out += "\n\n";
        out += p.raw_text;
    }
    return out;
}

SectionIndex::SectionIndex(std::string chapter_id, std::string title, std::vector<Section> sections)
    : chapter_id_(std::move(chapter_id)), title_(std::move(title)), sections_(std::move(sections))
{
    for (std::size_t s = 0; s < sections_.size(); ++s) {
        for (std::size_t p = 0; p < sections_[s].paragraphs.size(); ++p) {
            const auto& para = sections_[s].paragraphs[p];
            paragraph_pos_.emplace(para.paragraph_id, std::make_pair(s, p));
            if (para.fingerprint)
                fingerprint_map_.push_back({*para.fingerprint, para.paragraph_id, para.normalized_text});
        }
    }
    std::sort(fingerprint_map_.begin(), fingerprint_map_.end(), [](const auto& a, const auto& b) {
        if (a.fingerprint != b.fingerprint)
            return a.fingerprint < b.fingerprint;
        return a.paragraph_id < b.paragraph_id;
    });
}

const Paragraph* SectionIndex::find_paragraph(std::string_view paragraph_id) const
{
    auto it = paragraph_pos_.find(paragraph_id);
    if (it == paragraph_pos_.end())
        return nullptr;
    return &sections_[it->second.first].paragraphs[it->second.second];
}

const Section* SectionIndex::find_section(std::string_view section_id) const
{
    auto it = std::find_if(sections_.begin(), sections_.end(),
                           [&](const Section& s) { return s.section_id == section_id; });
    return it == sections_.end() ? nullptr : &*it;
}

std::size_t SectionIndex::paragraph_count() const
{
    return paragraph_pos_.size();
}

MarkupFormat format_for_path(std::string_view path)
{
    auto dot = path.rfind('.');
    if (dot == std::string_view::npos)
        return MarkupFormat::Auto;
    std::string ext(path.substr(dot + 1));
    for (auto& c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == "md" || ext == "markdown" || ext == "qmd")
        return MarkupFormat::Markdown;
    if (ext == "html" || ext == "htm" || ext == "xhtml")
        return MarkupFormat::Html;
    return MarkupFormat::Auto;
}

SectionIndex index_document(std::string_view document,
                            const std::string& chapter_id,
                            MarkupFormat format,
                            const std::string& fallback_title)
{
    if (format == MarkupFormat::Auto) {
        auto first = document.find_first_not_of(" \t\r\n");
        if (document.substr(0, 3) == "\xEF\xBB\xBF")
            first = document.find_first_not_of(" \t\r\n", 3);
        format = (first != std::string_view::npos && document[first] == '<') ? MarkupFormat::Html
                                                                             : MarkupFormat::Markdown;
    }
    if (document.substr(0, 3) == "\xEF\xBB\xBF")
        document.remove_prefix(3);

    const auto blocks = format == MarkupFormat::Html ? markup::parse_html(document)
                                                     : markup::parse_markdown(document);
    if (blocks.empty())
        throw Error(Errc::empty_document, "document '" + chapter_id + "' has no content");

    std::vector<Section> sections;
    auto open_section = [&](int level, std::string title) {
        Section s;
        s.section_id = numbered(chapter_id, 's', sections.size() + 1);
        s.chapter_id = chapter_id;
        s.heading_level = level;
        s.title = std::move(title);
        sections.push_back(std::move(s));
    };

    for (const auto& block : blocks) {
        if (block.kind == markup::Block::Kind::Heading) {
            open_section(block.level, block.text);
            continue;
        }
        if (sections.empty())
            open_section(1, fallback_title.empty() ? chapter_id : fallback_title);
        auto& current = sections.back();
        if (block.kind == markup::Block::Kind::Figure) {
            current.figures.push_back(block.text);
        } else {
            current.paragraphs.push_back(
                make_paragraph(numbered(current.section_id, 'p', current.paragraphs.size() + 1), block.text));
        }
    }

    for (auto& s : sections)
        s.token_count = count_tokens(s.full_text());

    // The chapter title is its first heading, or the fallback for heading-less prose.
    std::string title = fallback_title.empty() ? chapter_id : fallback_title;
    for (const auto& block : blocks) {
        if (block.kind == markup::Block::Kind::Heading) {
            title = block.text;
            break;
        }
    }
    return SectionIndex(chapter_id, std::move(title), std::move(sections));
}

std::string to_json(const SectionIndex& index)
{
    std::string out;
    out += "{\"chapter_id\":" + quoted(index.chapter_id());
    out += ",\"fingerprint_map\":[";
    bool first = true;
    for (const auto& e : index.fingerprint_map()) {
        if (!first)
            out += ',';
        first = false;
        out += "{\"fingerprint\":" + format_fingerprint(e.fingerprint) +
               ",\"normalized_text\":" + quoted(e.normalized_text) +
               ",\"paragraph_id\":" + quoted(e.paragraph_id) + "}";
    }
    out += "],\"sections\":[";
    first = true;
    for (const auto& s : index.sections()) {
        if (!first)
            out += ',';
        first = false;
        out += "{\"chapter_id\":" + quoted(s.chapter_id) + ",\"figures\":[";
        for (std::size_t i = 0; i < s.figures.size(); ++i)
            out += (i ? "," : "") + quoted(s.figures[i]);
        out += "],\"heading_level\":" + std::to_string(s.heading_level) + ",\"paragraphs\":[";
        for (std::size_t i = 0; i < s.paragraphs.size(); ++i) {
            const auto& p = s.paragraphs[i];
            out += i ? "," : "";
            out += "{\"fingerprint\":" + (p.fingerprint ? format_fingerprint(*p.fingerprint) : std::string("null")) +
                   ",\"normalized_text\":" + quoted(p.normalized_text) +
                   ",\"paragraph_id\":" + quoted(p.paragraph_id) +
                   ",\"raw_text\":" + quoted(p.raw_text) + "}";
        }
        out += "],\"section_id\":" + quoted(s.section_id) + ",\"title\":" + quoted(s.title) +
               ",\"token_count\":" + std::to_string(s.token_count) + "}";
    }
    out += "],\"title\":" + quoted(index.title()) + "}";
    return out;
}

SectionIndex section_index_from_json(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
        std::vector<Section> sections;
        for (const auto& js : doc.at("sections")) {
            Section s;
            s.section_id = js.at("section_id").get<std::string>();
            s.chapter_id = js.at("chapter_id").get<std::string>();
            s.heading_level = js.at("heading_level").get<int>();
            s.title = js.at("title").get<std::string>();
            s.figures = js.at("figures").get<std::vector<std::string>>();
            for (const auto& jp : js.at("paragraphs")) {
                auto p = make_paragraph(jp.at("paragraph_id").get<std::string>(), jp.at("raw_text").get<std::string>());
                const auto& stored = jp.at("fingerprint");
                const bool consistent = stored.is_null() ? !p.fingerprint.has_value()
                                                         : p.fingerprint && std::abs(*p.fingerprint - stored.get<double>()) <= 1e-6;
                if (!consistent)
                    throw Error(Errc::io_error, "stale fingerprint for paragraph " + p.paragraph_id);
                s.paragraphs.push_back(std::move(p));
            }
            s.token_count = count_tokens(s.full_text());
            sections.push_back(std::move(s));
        }
        return SectionIndex(doc.at("chapter_id").get<std::string>(), doc.at("title").get<std::string>(),
                            std::move(sections));
    } catch (const json::exception& e) {
        throw Error(Errc::io_error, std::string("invalid section index: ") + e.what());
    }
}

Corpus::Corpus(std::vector<SectionIndex> chapters) : chapters_(std::move(chapters))
{
    for (std::size_t c = 0; c < chapters_.size(); ++c) {
        if (!chapter_pos_.emplace(chapters_[c].chapter_id(), c).second)
            throw Error(Errc::invalid_argument, "duplicate chapter id " + chapters_[c].chapter_id());
        const auto& sections = chapters_[c].sections();
        for (std::size_t s = 0; s < sections.size(); ++s)
            section_pos_.emplace(sections[s].section_id, std::make_pair(c, s));
    }
}

const SectionIndex* Corpus::find_chapter(std::string_view chapter_id) const
{
    auto it = chapter_pos_.find(chapter_id);
    return it == chapter_pos_.end() ? nullptr : &chapters_[it->second];
}

const Section* Corpus::find_section(std::string_view section_id) const
{
    auto it = section_pos_.find(section_id);
    if (it == section_pos_.end())
        return nullptr;
    return &chapters_[it->second.first].sections()[it->second.second];
}

} // namespace companion

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "companion/error.hpp"

namespace companion {

/// Thrown for markup that cannot be split into blocks. Line and column are 1-based.
class MarkupError : public Error {
public:
    MarkupError(const std::string& message, std::size_t line, std::size_t column);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

enum class MarkupFormat { Auto, Markdown, Html };

struct Paragraph {
    std::string paragraph_id;
    std::string raw_text;
    std::string normalized_text;
    // Empty when normalized_text is empty; such paragraphs never enter matching.
    std::optional<double> fingerprint;
};

struct Section {
    std::string section_id;
    std::string chapter_id;
    int heading_level = 1;
    std::string title;
    std::vector<Paragraph> paragraphs;
    // Alt text or captions of figures; recorded but not fingerprinted.
    std::vector<std::string> figures;
    std::size_t token_count = 0;

    /// Paragraph raw texts joined by blank lines.
    std::string full_text() const;
};

struct FingerprintEntry {
    double fingerprint = 0.0;
    std::string paragraph_id;
    std::string normalized_text;
};

/// Sections of one chapter plus the sorted fingerprint map used for fuzzy lookup.
/// Immutable after construction.
class SectionIndex {
public:
    SectionIndex() = default;
    SectionIndex(std::string chapter_id, std::string title, std::vector<Section> sections);

    const std::string& chapter_id() const noexcept { return chapter_id_; }
    const std::string& title() const noexcept { return title_; }
    const std::vector<Section>& sections() const noexcept { return sections_; }
    const std::vector<FingerprintEntry>& fingerprint_map() const noexcept { return fingerprint_map_; }

    const Paragraph* find_paragraph(std::string_view paragraph_id) const;
    const Section* find_section(std::string_view section_id) const;
    std::size_t paragraph_count() const;

private:
    std::string chapter_id_;
    std::string title_;
    std::vector<Section> sections_;
    std::vector<FingerprintEntry> fingerprint_map_;
    std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> paragraph_pos_;
};

/// Lowercases ASCII letters, drops ASCII punctuation, collapses whitespace runs, trims.
std::string normalize(std::string_view text);

/// Mean code point of normalized text. Throws Errc::empty_text on empty input.
double fingerprint(std::string_view normalized_text);

/// ceil(code_points / 4).
std::size_t count_tokens(std::string_view text);

/// Splits a Markdown or HTML document into heading-delimited sections.
/// `fallback_title` names the implicit section used for text before the first heading.
SectionIndex index_document(std::string_view document,
                            const std::string& chapter_id,
                            MarkupFormat format = MarkupFormat::Auto,
                            const std::string& fallback_title = {});

MarkupFormat format_for_path(std::string_view path);

/// Canonical JSON for on-disk caching: sorted keys, fingerprints with 6 decimals.
std::string to_json(const SectionIndex& index);

/// Reads to_json() output. Fingerprints are recomputed and checked against the stored values.
SectionIndex section_index_from_json(std::string_view json);

/// Set of chapter indexes with cross-chapter lookups.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<SectionIndex> chapters);

    const std::vector<SectionIndex>& chapters() const noexcept { return chapters_; }
    bool empty() const noexcept { return chapters_.empty(); }

    const SectionIndex* find_chapter(std::string_view chapter_id) const;
    const Section* find_section(std::string_view section_id) const;

private:
    std::vector<SectionIndex> chapters_;
    std::map<std::string, std::size_t, std::less<>> chapter_pos_;
    std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> section_pos_;
};

} // namespace companion

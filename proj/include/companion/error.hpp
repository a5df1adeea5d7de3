#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace companion {

enum class Errc {
    invalid_argument,
    malformed_markup,
    empty_document,
    empty_text,
    empty_index,
    empty_query,
    both_empty,
    budget_too_small,
    empty_context,
    no_json_found,
    schema_violation,
    wrong_question_count,
    ambiguous_correct_answer,
    index_out_of_range,
    wrong_response_count,
    unknown_quiz_id,
    duplicate_quiz_id,
    unknown_provider,
    exhausted,
    all_providers_failed,
    unknown_section,
    unknown_chapter,
    missing_secret,
    malformed_report,
    corpus_not_loaded,
    generation_failed,
    io_error,
    config_error,
};

/// Stable snake_case name used in JSON error payloads and CLI diagnostics.
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace companion

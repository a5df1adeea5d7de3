#include "companion/error.hpp"

namespace companion {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::malformed_markup: return "malformed_markup";
    case Errc::empty_document: return "empty_document";
    case Errc::empty_text: return "empty_text";
    case Errc::empty_index: return "empty_index";
    case Errc::empty_query: return "empty_query";
    case Errc::both_empty: return "both_empty";
    case Errc::budget_too_small: return "budget_too_small";
    case Errc::empty_context: return "empty_context";
    case Errc::no_json_found: return "no_json_found";
    case Errc::schema_violation: return "schema_violation";
    case Errc::wrong_question_count: return "wrong_question_count";
    case Errc::ambiguous_correct_answer: return "ambiguous_correct_answer";
    case Errc::index_out_of_range: return "index_out_of_range";
    case Errc::wrong_response_count: return "wrong_response_count";
    case Errc::unknown_quiz_id: return "unknown_quiz_id";
    case Errc::duplicate_quiz_id: return "duplicate_quiz_id";
    case Errc::unknown_provider: return "unknown_provider";
    case Errc::exhausted: return "exhausted";
    case Errc::all_providers_failed: return "all_providers_failed";
    case Errc::unknown_section: return "unknown_section";
    case Errc::unknown_chapter: return "unknown_chapter";
    case Errc::missing_secret: return "missing_secret";
    case Errc::malformed_report: return "malformed_report";
    case Errc::corpus_not_loaded: return "corpus_not_loaded";
    case Errc::generation_failed: return "generation_failed";
    case Errc::io_error: return "io_error";
    case Errc::config_error: return "config_error";
    }
    return "unknown";
}

} // namespace companion

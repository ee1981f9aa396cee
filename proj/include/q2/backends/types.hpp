#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace q2::backends {

// Offsets throughout the backend layer count Unicode code points, matching
// what Python-hosted models report. utf8_slice() converts them back.
struct TextSpan {
    std::string text;
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const TextSpan &) const = default;
};

struct EntitySpan {
    std::string text;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string label;

    bool operator==(const EntitySpan &) const = default;
};

struct ParseToken {
    std::string token;
    std::string dependency_role;
    int head_index = -1;

    bool operator==(const ParseToken &) const = default;
};

struct AnnotationResult {
    std::vector<EntitySpan> entities;
    std::vector<TextSpan> noun_phrases;
    std::optional<std::vector<ParseToken>> parses;
};

struct GeneratedQuestion {
    std::string text;
    double model_score = 0.0;
};

// Ordered by non-increasing model_score; at most top_n entries.
struct QGResult {
    std::vector<GeneratedQuestion> questions;
};

struct QAResult {
    std::optional<TextSpan> answer;
    double confidence = 0.0;

    bool has_answer() const { return answer.has_value(); }
};

enum class NliLabel { entailment, neutral, contradiction };

std::string_view to_string(NliLabel l);
NliLabel parse_nli_label(std::string_view s);

struct NLIVerdict {
    NliLabel label = NliLabel::neutral;
    // Indexed by NliLabel.
    std::array<double, 3> probabilities{};
};

inline constexpr std::string_view kAnnotate = "annotate";
inline constexpr std::string_view kGenerate = "generate";
inline constexpr std::string_view kAnswer = "answer";
inline constexpr std::string_view kNli = "nli";
inline constexpr std::string_view kBertScore = "bertscore";

inline constexpr std::array<std::string_view, 5> kCapabilities = {kAnnotate, kGenerate, kAnswer, kNli,
                                                                   kBertScore};

// Code-point based substring; throws std::out_of_range past the end.
std::string utf8_slice(std::string_view text, std::size_t start, std::size_t end);

// Byte offset of code point `cp` (cp == length gives text.size()).
std::size_t utf8_byte_offset(std::string_view text, std::size_t cp);

} // namespace q2::backends

#pragma once

// JSON bodies for the per-capability endpoints:
//
//   POST /annotate  {"text"}
//                   -> {"entities":[{"text","start","end","label"}],
//                       "noun_phrases":[{"text","start","end"}],
//                       "parses":[{"token","dep","head"}]?}
//   POST /generate  {"span","context","beam_size","top_n"}
//                   -> {"questions":[{"text","score"}]}
//   POST /answer    {"question","context"}
//                   -> {"answer":{"text","start","end"}|null, "confidence"}
//   POST /nli       {"premise","hypothesis"}
//                   -> {"label", "probabilities":{"entailment","neutral","contradiction"}}
//   POST /bertscore {"candidate","reference"} -> {"f1"}
//
// Decoders validate the reply against the request (offsets slice-verify,
// ordering, probability mass) and throw ProtocolError on any mismatch.

#include <json.hpp>

#include "q2/backends/types.hpp"

namespace q2::backends::wire {

using nlohmann::json;

json annotate_request(std::string_view text);
json generate_request(std::string_view span, std::string_view context, int beam_size, int top_n);
json answer_request(std::string_view question, std::string_view context);
json nli_request(std::string_view premise, std::string_view hypothesis);
json bertscore_request(std::string_view candidate, std::string_view reference);

json encode(const AnnotationResult &r);
json encode(const QGResult &r);
json encode(const QAResult &r);
json encode(const NLIVerdict &v);

AnnotationResult decode_annotation(const json &reply, std::string_view text);
QGResult decode_questions(const json &reply, int top_n);
QAResult decode_answer(const json &reply, std::string_view context);
NLIVerdict decode_nli(const json &reply);
double decode_bertscore(const json &reply);

} // namespace q2::backends::wire

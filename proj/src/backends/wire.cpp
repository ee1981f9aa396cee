#include "q2/backends/wire.hpp"

#include <cmath>
#include <stdexcept>

#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2::backends {

std::string_view to_string(NliLabel l) {
    switch (l) {
    case NliLabel::entailment:
        return "entailment";
    case NliLabel::neutral:
        return "neutral";
    case NliLabel::contradiction:
        return "contradiction";
    }
    return "neutral";
}

NliLabel parse_nli_label(std::string_view s) {
    auto lower = lowercase_ascii(s);
    if (lower == "entailment")
        return NliLabel::entailment;
    if (lower == "neutral")
        return NliLabel::neutral;
    if (lower == "contradiction")
        return NliLabel::contradiction;
    throw ProtocolError("unknown NLI label '" + std::string(s) + "'");
}

std::size_t utf8_byte_offset(std::string_view text, std::size_t cp) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
            if (seen == cp)
                return i;
            ++seen;
        }
    }
    if (seen == cp)
        return text.size();
    throw std::out_of_range("code point offset past end of text");
}

std::string utf8_slice(std::string_view text, std::size_t start, std::size_t end) {
    if (end < start)
        throw std::out_of_range("span end before start");
    auto b = utf8_byte_offset(text, start);
    auto e = utf8_byte_offset(text, end);
    return std::string(text.substr(b, e - b));
}

namespace wire {

namespace {

const json &field(const json &obj, const char *name, const char *capability) {
    if (!obj.is_object())
        throw ProtocolError(std::string(capability) + ": reply is not a JSON object");
    auto it = obj.find(name);
    if (it == obj.end())
        throw ProtocolError(std::string(capability) + ": reply missing \"" + name + "\"");
    return *it;
}

std::string string_field(const json &obj, const char *name, const char *capability) {
    const auto &v = field(obj, name, capability);
    if (!v.is_string())
        throw ProtocolError(std::string(capability) + ": \"" + name + "\" must be a string");
    return v.get<std::string>();
}

double number_field(const json &obj, const char *name, const char *capability) {
    const auto &v = field(obj, name, capability);
    if (!v.is_number())
        throw ProtocolError(std::string(capability) + ": \"" + name + "\" must be a number");
    return v.get<double>();
}

std::size_t offset_field(const json &obj, const char *name, const char *capability) {
    const auto &v = field(obj, name, capability);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ProtocolError(std::string(capability) + ": \"" + name + "\" must be a non-negative integer");
    return v.get<std::size_t>();
}

TextSpan checked_span(const json &obj, std::string_view text, const char *capability) {
    TextSpan span{string_field(obj, "text", capability), offset_field(obj, "start", capability),
                  offset_field(obj, "end", capability)};
    std::string slice;
    try {
        slice = utf8_slice(text, span.start, span.end);
    } catch (const std::out_of_range &) {
        throw ProtocolError(std::string(capability) + ": span [" + std::to_string(span.start) + ", " +
                            std::to_string(span.end) + ") outside text");
    }
    if (slice != span.text)
        throw ProtocolError(std::string(capability) + ": span text \"" + span.text +
                            "\" does not match text slice \"" + slice + "\"");
    return span;
}

json span_json(const TextSpan &s) { return {{"text", s.text}, {"start", s.start}, {"end", s.end}}; }

} // namespace

json annotate_request(std::string_view text) { return {{"text", text}}; }

json generate_request(std::string_view span, std::string_view context, int beam_size, int top_n) {
    return {{"span", span}, {"context", context}, {"beam_size", beam_size}, {"top_n", top_n}};
}

json answer_request(std::string_view question, std::string_view context) {
    return {{"question", question}, {"context", context}};
}

json nli_request(std::string_view premise, std::string_view hypothesis) {
    return {{"premise", premise}, {"hypothesis", hypothesis}};
}

json bertscore_request(std::string_view candidate, std::string_view reference) {
    return {{"candidate", candidate}, {"reference", reference}};
}

json encode(const AnnotationResult &r) {
    json entities = json::array();
    for (const auto &e : r.entities)
        entities.push_back({{"text", e.text}, {"start", e.start}, {"end", e.end}, {"label", e.label}});
    json nps = json::array();
    for (const auto &np : r.noun_phrases)
        nps.push_back(span_json(np));
    json out = {{"entities", std::move(entities)}, {"noun_phrases", std::move(nps)}};
    if (r.parses) {
        json parses = json::array();
        for (const auto &t : *r.parses)
            parses.push_back({{"token", t.token}, {"dep", t.dependency_role}, {"head", t.head_index}});
        out["parses"] = std::move(parses);
    }
    return out;
}

json encode(const QGResult &r) {
    json qs = json::array();
    for (const auto &q : r.questions)
        qs.push_back({{"text", q.text}, {"score", q.model_score}});
    return {{"questions", std::move(qs)}};
}

json encode(const QAResult &r) {
    return {{"answer", r.answer ? span_json(*r.answer) : json(nullptr)}, {"confidence", r.confidence}};
}

json encode(const NLIVerdict &v) {
    json probs = json::object();
    for (auto l : {NliLabel::entailment, NliLabel::neutral, NliLabel::contradiction})
        probs[std::string(to_string(l))] = v.probabilities[static_cast<std::size_t>(l)];
    return {{"label", to_string(v.label)}, {"probabilities", std::move(probs)}};
}

AnnotationResult decode_annotation(const json &reply, std::string_view text) {
    constexpr const char *cap = "annotate";
    AnnotationResult r;
    const auto &entities = field(reply, "entities", cap);
    const auto &nps = field(reply, "noun_phrases", cap);
    if (!entities.is_array() || !nps.is_array())
        throw ProtocolError("annotate: entities and noun_phrases must be arrays");
    for (const auto &e : entities) {
        auto span = checked_span(e, text, cap);
        r.entities.push_back({std::move(span.text), span.start, span.end, string_field(e, "label", cap)});
    }
    for (const auto &np : nps)
        r.noun_phrases.push_back(checked_span(np, text, cap));
    if (auto it = reply.find("parses"); it != reply.end() && !it->is_null()) {
        if (!it->is_array())
            throw ProtocolError("annotate: parses must be an array");
        std::vector<ParseToken> parses;
        for (const auto &t : *it) {
            const auto &head = field(t, "head", cap);
            if (!head.is_number_integer())
                throw ProtocolError("annotate: parse head must be an integer");
            parses.push_back({string_field(t, "token", cap), string_field(t, "dep", cap), head.get<int>()});
        }
        r.parses = std::move(parses);
    }
    return r;
}

QGResult decode_questions(const json &reply, int top_n) {
    constexpr const char *cap = "generate";
    const auto &qs = field(reply, "questions", cap);
    if (!qs.is_array())
        throw ProtocolError("generate: questions must be an array");
    if (static_cast<int>(qs.size()) > top_n)
        throw ProtocolError("generate: " + std::to_string(qs.size()) + " questions returned for top_n " +
                            std::to_string(top_n));
    QGResult r;
    for (const auto &q : qs) {
        GeneratedQuestion g{string_field(q, "text", cap), number_field(q, "score", cap)};
        if (!r.questions.empty() && g.model_score > r.questions.back().model_score)
            throw ProtocolError("generate: questions not ordered by non-increasing score");
        r.questions.push_back(std::move(g));
    }
    return r;
}

QAResult decode_answer(const json &reply, std::string_view context) {
    constexpr const char *cap = "answer";
    QAResult r;
    const auto &answer = field(reply, "answer", cap);
    if (!answer.is_null())
        r.answer = checked_span(answer, context, cap);
    r.confidence = number_field(reply, "confidence", cap);
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
        throw ProtocolError("answer: confidence outside [0,1]");
    return r;
}

NLIVerdict decode_nli(const json &reply) {
    constexpr const char *cap = "nli";
    NLIVerdict v;
    v.label = parse_nli_label(string_field(reply, "label", cap));
    const auto &probs = field(reply, "probabilities", cap);
    double sum = 0.0;
    for (auto l : {NliLabel::entailment, NliLabel::neutral, NliLabel::contradiction}) {
        auto name = std::string(to_string(l));
        double p = number_field(probs, name.c_str(), cap);
        if (!(p >= 0.0 && p <= 1.0))
            throw ProtocolError("nli: probability for " + name + " outside [0,1]");
        v.probabilities[static_cast<std::size_t>(l)] = p;
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw ProtocolError("nli: probabilities sum to " + format_double(sum));
    double chosen = v.probabilities[static_cast<std::size_t>(v.label)];
    for (double p : v.probabilities)
        if (p > chosen)
            throw ProtocolError("nli: label is not the argmax of probabilities");
    return v;
}

double decode_bertscore(const json &reply) { return number_field(reply, "f1", "bertscore"); }

} // namespace wire
} // namespace q2::backends

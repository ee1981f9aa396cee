#include "q2/backends/client.hpp"

#include "q2/backends/wire.hpp"
#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2::backends {

namespace {

void require_text(std::string_view value, const char *what, std::string_view capability) {
    if (trim(value).empty())
        throw PreconditionError(std::string(capability) + ": " + what + " must be non-empty");
}

} // namespace

Backends::Backends(std::shared_ptr<Transport> all) {
    for (auto cap : kCapabilities)
        routes_[std::string(cap)] = all;
}

void Backends::set(std::string_view capability, std::shared_ptr<Transport> transport) {
    if (transport)
        routes_[std::string(capability)] = std::move(transport);
    else if (auto it = routes_.find(capability); it != routes_.end())
        routes_.erase(it);
}

bool Backends::has(std::string_view capability) const { return routes_.contains(capability); }

Transport &Backends::route(std::string_view capability) const {
    auto it = routes_.find(capability);
    if (it == routes_.end() || !it->second)
        throw TransportError("no backend configured for '" + std::string(capability) + "'");
    return *it->second;
}

AnnotationResult Backends::annotate_spans(std::string_view text) const {
    require_text(text, "text", kAnnotate);
    return wire::decode_annotation(route(kAnnotate).call(kAnnotate, wire::annotate_request(text)), text);
}

QGResult Backends::generate_questions(std::string_view span, std::string_view context, int beam_size,
                                      int top_n) const {
    require_text(span, "span", kGenerate);
    if (context.find(span) == std::string_view::npos)
        throw PreconditionError("generate: span \"" + std::string(span) + "\" does not occur in context");
    if (top_n < 1 || beam_size < top_n)
        throw PreconditionError("generate: need beam_size >= top_n >= 1 (got beam_size " +
                                std::to_string(beam_size) + ", top_n " + std::to_string(top_n) + ")");
    return wire::decode_questions(route(kGenerate).call(kGenerate, wire::generate_request(span, context, beam_size, top_n)),
                                  top_n);
}

QAResult Backends::answer_question(std::string_view question, std::string_view context) const {
    require_text(question, "question", kAnswer);
    require_text(context, "context", kAnswer);
    return wire::decode_answer(route(kAnswer).call(kAnswer, wire::answer_request(question, context)), context);
}

NLIVerdict Backends::classify_nli(std::string_view premise, std::string_view hypothesis) const {
    require_text(premise, "premise", kNli);
    require_text(hypothesis, "hypothesis", kNli);
    return wire::decode_nli(route(kNli).call(kNli, wire::nli_request(premise, hypothesis)));
}

std::optional<double> Backends::bertscore(std::string_view candidate, std::string_view reference) const {
    if (!has(kBertScore))
        return std::nullopt;
    return wire::decode_bertscore(route(kBertScore).call(kBertScore, wire::bertscore_request(candidate, reference)));
}

} // namespace q2::backends

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "q2/backends/transport.hpp"
#include "q2/backends/types.hpp"

namespace q2::backends {

// Typed access to the model capabilities. Each capability is routed to its
// own Transport; requests are encoded and replies validated against the wire
// format, so mocks, HTTP servers and stdio processes all look the same here.
//
// Thread-safe as long as the transports are.
class Backends {
  public:
    Backends() = default;
    // Routes every capability to `all`.
    explicit Backends(std::shared_ptr<Transport> all);

    void set(std::string_view capability, std::shared_ptr<Transport> transport);
    bool has(std::string_view capability) const;

    AnnotationResult annotate_spans(std::string_view text) const;
    QGResult generate_questions(std::string_view span, std::string_view context, int beam_size, int top_n) const;
    QAResult answer_question(std::string_view question, std::string_view context) const;
    NLIVerdict classify_nli(std::string_view premise, std::string_view hypothesis) const;
    // nullopt when no bertscore backend is configured.
    std::optional<double> bertscore(std::string_view candidate, std::string_view reference) const;

  private:
    Transport &route(std::string_view capability) const;

    std::map<std::string, std::shared_ptr<Transport>, std::less<>> routes_;
};

} // namespace q2::backends

#include "q2/backends/mock.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>

#include "q2/backends/wire.hpp"
#include "q2/error.hpp"
#include "q2/text.hpp"

namespace q2::backends {

namespace {

using nlohmann::json;

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

// Case-insensitive search for `needle` bounded by non-word bytes on both sides.
std::size_t find_word_ci(std::string_view haystack, std::string_view needle, std::size_t from = 0) {
    if (needle.empty())
        return std::string_view::npos;
    const auto hay = lowercase_ascii(haystack);
    const auto ndl = lowercase_ascii(needle);
    for (auto pos = hay.find(ndl, from); pos != std::string::npos; pos = hay.find(ndl, pos + 1)) {
        bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(hay[pos - 1])) ||
                       !is_word_byte(static_cast<unsigned char>(ndl.front()));
        auto end = pos + ndl.size();
        bool right_ok = end == hay.size() || !is_word_byte(static_cast<unsigned char>(hay[end])) ||
                        !is_word_byte(static_cast<unsigned char>(ndl.back()));
        if (left_ok && right_ok)
            return pos;
    }
    return std::string_view::npos;
}

std::size_t code_points_before(std::string_view text, std::size_t byte) {
    return utf8_length(text.substr(0, byte));
}

TextSpan span_from_bytes(std::string_view text, std::size_t b, std::size_t e) {
    return TextSpan{std::string(text.substr(b, e - b)), code_points_before(text, b), code_points_before(text, e)};
}

bool is_aux(std::string_view w) {
    static const std::set<std::string, std::less<>> aux = {"is",   "are",   "was",  "were",  "am",   "do",
                                                           "does", "did",   "can",  "could", "will", "would",
                                                           "has",  "have",  "had",  "should", "may", "might"};
    return aux.contains(lowercase_ascii(w));
}

// Strips leading whitespace, ASCII punctuation and U+2026 from [b, e).
std::size_t skip_lead(std::string_view s, std::size_t b, std::size_t e) {
    for (;;) {
        while (b < e && (std::isspace(static_cast<unsigned char>(s[b])) ||
                         std::ispunct(static_cast<unsigned char>(s[b]))))
            ++b;
        if (s.substr(b, 3) == "\xE2\x80\xA6" && b + 3 <= e) {
            b += 3;
            continue;
        }
        return b;
    }
}

std::size_t trim_trailing(std::string_view s, std::size_t b, std::size_t e) {
    while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) ||
                     std::ispunct(static_cast<unsigned char>(s[e - 1]))))
        --e;
    return e;
}

std::size_t sentence_start(std::string_view s, std::size_t pos) {
    for (std::size_t i = pos; i > 0; --i)
        if (is_sentence_end(s[i - 1]) && (i == s.size() || std::isspace(static_cast<unsigned char>(s[i]))))
            return i;
    return 0;
}

std::size_t sentence_end(std::string_view s, std::size_t pos) {
    for (std::size_t i = pos; i < s.size(); ++i)
        if (is_sentence_end(s[i]) && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1]))))
            return i;
    return s.size();
}

std::string join(const std::vector<std::string> &words, std::size_t from) {
    std::string out;
    for (std::size_t i = from; i < words.size(); ++i) {
        if (!out.empty())
            out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::vector<std::string> question_words(std::string_view question) {
    auto q = trim(question);
    while (!q.empty() && (q.back() == '?' || std::isspace(static_cast<unsigned char>(q.back()))))
        q.remove_suffix(1);
    auto words = split_whitespace(q);
    if (words.empty())
        return words;
    auto head = lowercase_ascii(words[0]);
    if (head != "what" && head != "who")
        return {};
    return words;
}

std::vector<std::string> apply_aliases(std::vector<std::string> tokens,
                                       const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> &aliases) {
    for (const auto &[from, to] : aliases) {
        if (from.empty())
            continue;
        std::vector<std::string> out;
        for (std::size_t i = 0; i < tokens.size();) {
            if (i + from.size() <= tokens.size() && std::equal(from.begin(), from.end(), tokens.begin() + i)) {
                out.insert(out.end(), to.begin(), to.end());
                i += from.size();
            } else {
                out.push_back(tokens[i++]);
            }
        }
        tokens = std::move(out);
    }
    return tokens;
}

NLIVerdict verdict(NliLabel label) {
    NLIVerdict v;
    v.label = label;
    v.probabilities.fill(0.05);
    v.probabilities[static_cast<std::size_t>(label)] = 0.9;
    return v;
}

std::string require_string(const json &req, const char *name) {
    auto it = req.find(name);
    if (it == req.end() || !it->is_string())
        throw ProtocolError(std::string("mock backend: request missing string \"") + name + "\"");
    return it->get<std::string>();
}

} // namespace

MockTables MockTables::from_json(const json &j) {
    MockTables t;
    if (!j.is_object())
        throw SchemaError("mock tables must be a JSON object");
    try {
        if (auto a = j.find("annotator"); a != j.end()) {
            t.annotator.entities = a->value("entities", std::map<std::string, std::string>{});
            t.annotator.noun_phrases = a->value("noun_phrases", std::vector<std::string>{});
            t.annotator.parses = a->value("parses", false);
        }
        if (auto g = j.find("qg"); g != j.end()) {
            t.qg.questions = g->value("questions", std::map<std::string, std::vector<std::string>>{});
            t.qg.templates = g->value("templates", true);
        }
        if (auto q = j.find("qa"); q != j.end()) {
            t.qa.answers = q->value("answers", std::map<std::string, std::vector<std::string>>{});
            t.qa.templates = q->value("templates", true);
        }
        if (auto n = j.find("nli"); n != j.end()) {
            for (const auto &p : n->value("pairs", json::array()))
                t.nli.pairs.push_back({p.at("premise").get<std::string>(), p.at("hypothesis").get<std::string>(),
                                       parse_nli_label(p.at("label").get<std::string>())});
            t.nli.aliases = n->value("aliases", std::map<std::string, std::string>{});
            t.nli.negation = n->value("negation", true);
            t.nli.fallback = parse_nli_label(n->value("default", std::string("neutral")));
        }
        if (auto b = j.find("bertscore"); b != j.end()) {
            t.bertscore.equal = b->value("equal", 1.0);
            t.bertscore.fallback = b->value("default", 0.5);
        }
    } catch (const json::exception &e) {
        throw SchemaError(std::string("mock tables: ") + e.what());
    } catch (const ProtocolError &e) {
        throw SchemaError(std::string("mock tables: ") + e.what());
    }
    return t;
}

MockTables MockTables::load(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open mock tables " + path);
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error &e) {
        throw ParseError(path + ": " + e.what(), 1);
    }
}

json MockTables::to_json() const {
    json pairs = json::array();
    for (const auto &p : nli.pairs)
        pairs.push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}, {"label", to_string(p.label)}});
    return {{"annotator",
             {{"entities", annotator.entities}, {"noun_phrases", annotator.noun_phrases}, {"parses", annotator.parses}}},
            {"qg", {{"questions", qg.questions}, {"templates", qg.templates}}},
            {"qa", {{"answers", qa.answers}, {"templates", qa.templates}}},
            {"nli",
             {{"pairs", pairs},
              {"aliases", nli.aliases},
              {"negation", nli.negation},
              {"default", to_string(nli.fallback)}}},
            {"bertscore", {{"equal", bertscore.equal}, {"default", bertscore.fallback}}}};
}

AnnotationResult MockBackend::annotate(std::string_view text) const {
    AnnotationResult r;
    for (const auto &[surface, label] : tables_.annotator.entities) {
        for (auto pos = find_word_ci(text, surface); pos != std::string_view::npos;
             pos = find_word_ci(text, surface, pos + 1)) {
            auto s = span_from_bytes(text, pos, pos + surface.size());
            r.entities.push_back({std::move(s.text), s.start, s.end, label});
        }
    }
    for (const auto &np : tables_.annotator.noun_phrases) {
        for (auto pos = find_word_ci(text, np); pos != std::string_view::npos; pos = find_word_ci(text, np, pos + 1))
            r.noun_phrases.push_back(span_from_bytes(text, pos, pos + np.size()));
    }
    auto by_start = [](const auto &a, const auto &b) { return std::tie(a.start, a.end) < std::tie(b.start, b.end); };
    std::sort(r.entities.begin(), r.entities.end(), by_start);
    std::sort(r.noun_phrases.begin(), r.noun_phrases.end(), by_start);

    if (tables_.annotator.parses) {
        static const std::set<std::string, std::less<>> pronouns = {"i", "you", "he", "she", "we", "they", "it"};
        std::vector<ParseToken> parses;
        auto tokens = split_whitespace(text);
        std::vector<std::string> words;
        for (auto &t : tokens) {
            std::string w;
            for (char c : t)
                if (is_word_byte(static_cast<unsigned char>(c)) || c == '\'')
                    w.push_back(c);
            if (!w.empty())
                words.push_back(std::move(w));
        }
        for (std::size_t i = 0; i < words.size(); ++i) {
            auto lower = lowercase_ascii(words[i]);
            std::string role = "dep";
            if (pronouns.contains(lower))
                role = (i == 0 || is_aux(words[i - 1])) ? "nsubj" : "dobj";
            else if (lower == "my" || lower == "your")
                role = "poss";
            parses.push_back({words[i], role, -1});
        }
        r.parses = std::move(parses);
    }
    return r;
}

QGResult MockBackend::generate(std::string_view span, std::string_view context, int top_n) const {
    std::vector<std::string> candidates;
    if (auto it = tables_.qg.questions.find(std::string(span)); it != tables_.qg.questions.end())
        candidates = it->second;

    if (tables_.qg.templates) {
        auto pos = context.find(span);
        if (pos == std::string_view::npos)
            pos = find_word_ci(context, span);
        if (pos != std::string_view::npos) {
            auto s_begin = skip_lead(context, sentence_start(context, pos), pos);
            auto s_end = sentence_end(context, pos + span.size());
            auto prefix = split_whitespace(context.substr(s_begin, pos - s_begin));
            auto suffix_end = trim_trailing(context, pos + span.size(), s_end);
            auto suffix = trim(context.substr(pos + span.size(), suffix_end - (pos + span.size())));
            if (prefix.empty() && !suffix.empty())
                candidates.push_back("What " + std::string(suffix) + "?");
            // Invert the rightmost "<subject> <aux>" pair before the span:
            // "... they are reliant on X" -> "What are they reliant on?".
            std::size_t k = prefix.size();
            while (k > 1 && !is_aux(prefix[k - 1]))
                --k;
            if (suffix.empty() && k > 1) {
                const auto aux = k - 1;
                std::vector<std::string> rest(prefix.begin() + static_cast<long>(aux) + 1, prefix.end());
                candidates.push_back("What " + prefix[aux] + " " + prefix[aux - 1] +
                                     (rest.empty() ? "" : " " + join(rest, 0)) + "?");
            }
        }
    }

    QGResult r;
    for (std::size_t i = 0; i < candidates.size() && static_cast<int>(i) < top_n; ++i)
        r.questions.push_back({candidates[i], -static_cast<double>(i)});
    return r;
}

QAResult MockBackend::answer(std::string_view question, std::string_view context) const {
    QAResult r;
    if (auto it = tables_.qa.answers.find(std::string(trim(question))); it != tables_.qa.answers.end()) {
        for (const auto &candidate : it->second) {
            auto pos = find_word_ci(context, candidate);
            if (pos != std::string_view::npos) {
                r.answer = span_from_bytes(context, pos, pos + candidate.size());
                r.confidence = 1.0;
                return r;
            }
        }
    }
    if (!tables_.qa.templates)
        return r;

    auto words = question_words(question);
    if (words.size() >= 3 && is_aux(words[1])) {
        // "What are they reliant on?" -> find "they are reliant on" and take what follows.
        std::vector<std::string> pattern_words = {words[2], words[1]};
        pattern_words.insert(pattern_words.end(), words.begin() + 3, words.end());
        auto pattern = join(pattern_words, 0);
        auto pos = find_word_ci(context, pattern);
        if (pos != std::string_view::npos) {
            auto b = skip_lead(context, pos + pattern.size(), context.size());
            auto e = trim_trailing(context, b, sentence_end(context, b));
            if (e > b) {
                r.answer = span_from_bytes(context, b, e);
                r.confidence = 1.0;
                return r;
            }
        }
    }
    if (words.size() >= 2) {
        // "What is very acidic?" -> find "is very acidic" and take the clause before it.
        auto pattern = join(words, 1);
        auto pos = find_word_ci(context, pattern);
        if (pos != std::string_view::npos && pos > 0) {
            std::size_t clause = 0;
            for (std::size_t i = pos; i > 0; --i) {
                char c = context[i - 1];
                if (c == ',' || c == ';' || c == ':' || is_sentence_end(c)) {
                    clause = i;
                    break;
                }
            }
            auto b = skip_lead(context, clause, pos);
            auto e = trim_trailing(context, b, pos);
            if (e > b) {
                r.answer = span_from_bytes(context, b, e);
                r.confidence = 1.0;
            }
        }
    }
    return r;
}

NLIVerdict MockBackend::classify(std::string_view premise, std::string_view hypothesis) const {
    const auto p_trim = trim(premise), h_trim = trim(hypothesis);
    for (const auto &pair : tables_.nli.pairs)
        if (trim(pair.premise) == p_trim && trim(pair.hypothesis) == h_trim)
            return verdict(pair.label);

    auto p_tokens = word_tokens(premise), h_tokens = word_tokens(hypothesis);
    if (p_tokens == h_tokens)
        return verdict(NliLabel::entailment);

    if (!tables_.nli.aliases.empty()) {
        std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> aliases;
        for (const auto &[from, to] : tables_.nli.aliases)
            aliases.emplace_back(word_tokens(from), word_tokens(to));
        if (apply_aliases(p_tokens, aliases) == apply_aliases(h_tokens, aliases))
            return verdict(NliLabel::entailment);
    }

    if (tables_.nli.negation) {
        static const std::set<std::string, std::less<>> negators = {"not", "no", "never", "n't", "t"};
        static const std::set<std::string, std::less<>> dropped = {"do",  "does", "did", "don",
                                                                   "doesn", "didn", "isn", "aren"};
        auto strip = [&](const std::vector<std::string> &tokens, int &negations) {
            std::vector<std::string> out;
            for (const auto &t : tokens) {
                if (negators.contains(t))
                    ++negations;
                else if (!dropped.contains(t))
                    out.push_back(t);
            }
            return out;
        };
        int pn = 0, hn = 0;
        auto ps = strip(p_tokens, pn), hs = strip(h_tokens, hn);
        if (ps == hs && (pn % 2) != (hn % 2))
            return verdict(NliLabel::contradiction);
    }
    return verdict(tables_.nli.fallback);
}

double MockBackend::bertscore(std::string_view candidate, std::string_view reference) const {
    return candidate == reference ? tables_.bertscore.equal : tables_.bertscore.fallback;
}

json MockBackend::call(std::string_view capability, const json &request) {
    if (capability == kAnnotate)
        return wire::encode(annotate(require_string(request, "text")));
    if (capability == kGenerate) {
        auto top_n = request.value("top_n", 1);
        return wire::encode(generate(require_string(request, "span"), require_string(request, "context"), top_n));
    }
    if (capability == kAnswer)
        return wire::encode(answer(require_string(request, "question"), require_string(request, "context")));
    if (capability == kNli)
        return wire::encode(classify(require_string(request, "premise"), require_string(request, "hypothesis")));
    if (capability == kBertScore)
        return {{"f1", bertscore(require_string(request, "candidate"), require_string(request, "reference"))}};
    throw ProtocolError("mock backend: unknown capability '" + std::string(capability) + "'");
}

} // namespace q2::backends

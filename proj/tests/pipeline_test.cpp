#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "q2/backends/mock.hpp"
#include "q2/backends/wire.hpp"
#include "q2/error.hpp"
#include "q2/pipeline.hpp"

namespace q2 {
namespace {

using backends::AnnotationResult;
using backends::Backends;
using backends::MockBackend;
using backends::MockTables;
using nlohmann::json;

Backends walkthrough() { return Backends(std::make_shared<MockBackend>(testing::walkthrough_tables())); }

// Mock backends whose QA always answers `answer` (or nothing) on any context.
Backends with_fixed_answer(std::optional<std::string> answer) {
    auto mock = std::make_shared<MockBackend>(testing::walkthrough_tables());
    Backends b(mock);
    b.set(backends::kAnswer, std::make_shared<testing::FunctionTransport>([answer](std::string_view, const json &req) {
              const auto context = req.at("context").get<std::string>();
              if (!answer)
                  return json{{"answer", nullptr}, {"confidence", 0.0}};
              const auto pos = context.find(*answer);
              if (pos == std::string::npos)
                  return json{{"answer", nullptr}, {"confidence", 0.0}};
              return json{{"answer", {{"text", *answer}, {"start", pos}, {"end", pos + answer->size()}}},
                          {"confidence", 1.0}};
          }));
    return b;
}

CandidateQuestion question(std::string text, std::string span_text, int rank = 1,
                           QuestionStatus status = QuestionStatus::valid) {
    return CandidateQuestion{std::move(text), InformativeSpan{std::move(span_text), 0, 0, SpanKind::noun_phrase}, rank,
                             status};
}

TEST(ExtractCandidates, CoffeeResponse) {
    const auto spans = extract_candidates("coffee is very acidic.", walkthrough());
    ASSERT_EQ(spans.size(), 1u);
    EXPECT_EQ(spans[0], (InformativeSpan{"coffee", 0, 6, SpanKind::noun_phrase}));
}

TEST(ExtractCandidates, NothingToMark) {
    EXPECT_TRUE(extract_candidates("well, hmm, perhaps.", walkthrough()).empty());
}

TEST(ExtractCandidates, RepeatedMentionIsKeptOnce) {
    const auto spans = extract_candidates("Madonna moved to Madonna's city", walkthrough());
    ASSERT_EQ(spans.size(), 1u);
    EXPECT_EQ(spans[0].text, "Madonna");
    EXPECT_EQ(spans[0].char_start, 0u);
    EXPECT_EQ(spans[0].kind, SpanKind::entity);
}

TEST(ExtractCandidates, EmptyResponseIsPreconditionViolation) {
    EXPECT_THROW(extract_candidates(" ", walkthrough()), PreconditionError);
}

TEST(MergeCandidates, EntityLabelWinsAndOrderIsByOffset) {
    AnnotationResult a;
    a.noun_phrases = {{"the Dog", 10, 17}, {"cats", 0, 4}, {"a dog", 20, 25}, {"the", 30, 33}};
    a.entities = {{"Dog", 14, 17, "ANIMAL"}};
    const auto spans = merge_candidates(a);
    ASSERT_EQ(spans.size(), 2u);
    EXPECT_EQ(spans[0].text, "cats");
    EXPECT_EQ(spans[1].text, "the Dog");
    EXPECT_EQ(spans[1].kind, SpanKind::entity);
}

TEST(Roundtrip, PreservedAnswerPasses) {
    EXPECT_TRUE(validate_roundtrip(question("What is very acidic?", "coffee"), "coffee is very acidic.", walkthrough()));
}

TEST(Roundtrip, NoAnswerFails) {
    EXPECT_FALSE(validate_roundtrip(question("What is sweet?", "coffee"), "coffee is very acidic.",
                                    with_fixed_answer(std::nullopt)));
}

TEST(Roundtrip, NormalizedComparison) {
    const auto b = with_fixed_answer("Coffee");
    EXPECT_TRUE(validate_roundtrip(question("What is very acidic?", "coffee"), "Coffee is very acidic.", b));
    EXPECT_FALSE(validate_roundtrip(question("What is very acidic?", "coffee"), "Coffee is very acidic.", b, true));
    EXPECT_FALSE(validate_roundtrip(question("What is very acidic?", "tea"), "Coffee is very acidic.", b));
}

TEST(PersonalFilter, Examples) {
    EXPECT_TRUE(filter_personal("What do I love?", std::nullopt));
    EXPECT_TRUE(filter_personal("What is your favorite color?", std::nullopt));
    EXPECT_FALSE(filter_personal("Who founded Sephora?", std::nullopt));
    EXPECT_TRUE(filter_personal("What is MY name?", std::nullopt));
    // "myth" and "yourself" are not the listed pronouns.
    EXPECT_FALSE(filter_personal("What myth is told?", std::nullopt));
    EXPECT_FALSE(filter_personal("Who did it yourself?", std::nullopt));
}

TEST(PersonalFilter, ParseDecidesSubjectPronouns) {
    using backends::ParseToken;
    const std::vector<ParseToken> subject = {{"What", "dobj", 2}, {"do", "aux", 2}, {"I", "nsubj", 2}, {"love", "ROOT", -1}};
    const std::vector<ParseToken> object = {{"Who", "nsubj", 1}, {"told", "ROOT", -1}, {"you", "dobj", 1}};
    EXPECT_TRUE(filter_personal("What do I love?", subject));
    EXPECT_FALSE(filter_personal("Who told you?", object));
    // Without a parse every whole-token "you" counts.
    EXPECT_TRUE(filter_personal("Who told you?", std::nullopt));
    // Possessives are discarded whatever the parse says.
    EXPECT_TRUE(filter_personal("Who is your friend?", std::vector<ParseToken>{}));
}

TEST(SelectQuestions, TopOneSkipsFilteredRanks) {
    std::vector<std::vector<CandidateQuestion>> per_span = {
        {question("q1", "s", 1, QuestionStatus::filtered_roundtrip), question("q2", "s", 2), question("q3", "s", 3)}};
    const auto top1 = select_questions(per_span, Variant::top1_filtered);
    ASSERT_EQ(top1.size(), 1u);
    EXPECT_EQ(top1[0].beam_rank, 2);
}

TEST(SelectQuestions, AllFilteredGivesNothing) {
    std::vector<std::vector<CandidateQuestion>> per_span = {
        {question("q1", "a", 1, QuestionStatus::filtered_personal)},
        {question("q2", "b", 1, QuestionStatus::filtered_duplicate)}};
    EXPECT_TRUE(select_questions(per_span, Variant::top1_filtered).empty());
    EXPECT_TRUE(select_questions(per_span, Variant::all_n).empty());
}

TEST(SelectQuestions, AllNKeepsEveryValidQuestion) {
    std::vector<std::vector<CandidateQuestion>> per_span = {
        {question("q1", "s", 1), question("q2", "s", 2, QuestionStatus::filtered_roundtrip), question("q3", "s", 3),
         question("q4", "s", 4, QuestionStatus::filtered_personal), question("q5", "s", 5)}};
    const auto all = select_questions(per_span, Variant::all_n);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].text, "q1");
    EXPECT_EQ(all[1].text, "q3");
    EXPECT_EQ(all[2].text, "q5");
}

TEST(KnowledgeAnswer, Examples) {
    const auto b = walkthrough();
    EXPECT_EQ(knowledge_answer("What are they reliant on?",
                               "The giant panda is a conservation reliant vulnerable species.", b)
                  .answer->text,
              "conservation");
    EXPECT_FALSE(knowledge_answer("What are they reliant on?", "The Eiffel Tower is in Paris.", b).answer);
    EXPECT_EQ(knowledge_answer("Where were the Red Hot Chili Peppers formed?",
                               "The band was formed in Los Angeles in 1982.", b)
                  .answer->text,
              "Los Angeles");
}

TEST(BuildQuestions, DuplicateStatusAndOrdering) {
    auto tables = testing::walkthrough_tables();
    tables.qg.questions["coffee"] = {"What is very acidic?", "what is very acidic? ", "What do I love?"};
    Backends b(std::make_shared<MockBackend>(tables));
    EvalConfig config;
    config.variant = Variant::all_n;
    const auto set = build_questions("coffee is very acidic.", config, b);
    ASSERT_EQ(set.candidates.size(), 4u);
    EXPECT_EQ(set.candidates[0].status, QuestionStatus::valid);
    EXPECT_EQ(set.candidates[1].status, QuestionStatus::filtered_duplicate);
    // The QA mock cannot answer it on the response at all.
    EXPECT_EQ(set.candidates[2].status, QuestionStatus::filtered_roundtrip);
    // Template duplicate of rank 1.
    EXPECT_EQ(set.candidates[3].status, QuestionStatus::filtered_duplicate);
    for (std::size_t i = 0; i < set.candidates.size(); ++i)
        EXPECT_EQ(set.candidates[i].beam_rank, static_cast<int>(i) + 1);
    ASSERT_EQ(set.selected.size(), 1u);
}

TEST(BuildQuestions, PersonalFilterAndDnliMode) {
    Backends b(std::make_shared<MockBackend>(testing::walkthrough_tables()));
    const std::string response = "I am fond of cats.";
    EvalConfig wow;
    const auto filtered = build_questions(response, wow, b);
    ASSERT_EQ(filtered.candidates.size(), 1u);
    EXPECT_EQ(filtered.candidates[0].text, "What am I fond of?");
    EXPECT_EQ(filtered.candidates[0].status, QuestionStatus::filtered_personal);
    EXPECT_TRUE(filtered.selected.empty());

    EvalConfig dnli;
    dnli.mode = EvalMode::dnli;
    EXPECT_FALSE(dnli.personal_filter_enabled());
    const auto kept = build_questions(response, dnli, b);
    EXPECT_EQ(kept.candidates[0].status, QuestionStatus::valid);
    EXPECT_EQ(kept.selected.size(), 1u);

    EvalConfig off;
    off.personal_filter = false;
    EXPECT_EQ(build_questions(response, off, b).selected.size(), 1u);
}

TEST(BuildQuestions, GreedyRequestsOneQuestion) {
    std::vector<json> requests;
    auto mock = std::make_shared<MockBackend>(testing::walkthrough_tables());
    Backends b(mock);
    b.set(backends::kGenerate, std::make_shared<testing::FunctionTransport>([&](std::string_view cap, const json &req) {
              requests.push_back(req);
              return mock->call(cap, req);
          }));
    EvalConfig config;
    config.decoding = Decoding::greedy;
    build_questions("coffee is very acidic.", config, b);
    ASSERT_EQ(requests.size(), 1u);
    EXPECT_EQ(requests[0]["top_n"], 1);
    EXPECT_EQ(requests[0]["beam_size"], 1);

    requests.clear();
    build_questions("coffee is very acidic.", EvalConfig{}, b);
    EXPECT_EQ(requests[0]["top_n"], 5);
    EXPECT_EQ(requests[0]["beam_size"], 5);
}

TEST(EvalConfigNames, ParseAndPrint) {
    EXPECT_EQ(parse_variant("top1"), Variant::top1_filtered);
    EXPECT_EQ(parse_variant("all-n"), Variant::all_n);
    EXPECT_EQ(parse_decoding("greedy"), Decoding::greedy);
    EXPECT_EQ(parse_eval_mode("dnli"), EvalMode::dnli);
    EXPECT_EQ(parse_fallback_orientation("response-premise"), FallbackOrientation::response_premise);
    EXPECT_THROW(parse_variant("top2"), PreconditionError);
    EXPECT_EQ(parse_variant(to_string(Variant::all_n)), Variant::all_n);
}

} // namespace
} // namespace q2

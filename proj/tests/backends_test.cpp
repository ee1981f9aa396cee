#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "q2/backends/client.hpp"
#include "q2/backends/mock.hpp"
#include "q2/backends/transcript.hpp"
#include "q2/backends/wire.hpp"
#include "q2/error.hpp"

namespace q2::backends {
namespace {

using nlohmann::json;

// Transport returning a fixed reply, for exercising the decoders.
class CannedTransport : public Transport {
  public:
    explicit CannedTransport(json reply) : reply_(std::move(reply)) {}
    json call(std::string_view, const json &) override {
        ++calls;
        return reply_;
    }
    std::atomic<int> calls{0};

  private:
    json reply_;
};

Backends walkthrough() { return Backends(std::make_shared<MockBackend>(testing::walkthrough_tables())); }

TEST(Annotate, CoffeeIsAnInformativeSpan) {
    const auto r = walkthrough().annotate_spans("coffee is very acidic");
    ASSERT_FALSE(r.noun_phrases.empty());
    EXPECT_EQ(r.noun_phrases[0], (TextSpan{"coffee", 0, 6}));
}

TEST(Annotate, LexiconEntities) {
    const auto r = walkthrough().annotate_spans("Madonna moved to New York City");
    std::vector<std::string> texts;
    for (const auto &e : r.entities)
        texts.push_back(e.text);
    EXPECT_NE(std::find(texts.begin(), texts.end(), "Madonna"), texts.end());
    EXPECT_NE(std::find(texts.begin(), texts.end(), "New York City"), texts.end());
}

TEST(Annotate, OffsetsAreCodePoints) {
    const std::string text = "Café near Madonna";
    const auto r = walkthrough().annotate_spans(text);
    ASSERT_EQ(r.entities.size(), 1u);
    EXPECT_EQ(r.entities[0].start, 10u);
    EXPECT_EQ(r.entities[0].end, 17u);
    EXPECT_EQ(utf8_slice(text, 10, 17), "Madonna");
}

TEST(Annotate, EmptyTextIsPreconditionViolation) {
    EXPECT_THROW(walkthrough().annotate_spans(""), PreconditionError);
}

TEST(Generate, CoffeeTemplateQuestion) {
    const auto r =
        walkthrough().generate_questions("coffee", "coffee is very acidic. it has stimulating effects on humans.", 5, 5);
    ASSERT_FALSE(r.questions.empty());
    EXPECT_EQ(r.questions[0].text, "What is very acidic?");
}

TEST(Generate, ReliantOnTemplateQuestion) {
    const auto r = walkthrough().generate_questions(
        "vulnerable species", "i'm not sure about that but i do know that they are reliant on vulnerable species!", 5,
        5);
    std::vector<std::string> texts;
    for (const auto &q : r.questions)
        texts.push_back(q.text);
    EXPECT_NE(std::find(texts.begin(), texts.end(), "What are they reliant on?"), texts.end());
}

TEST(Generate, TopNOneGivesExactlyTheTemplateQuestion) {
    auto tables = testing::walkthrough_tables();
    tables.qg.questions["coffee"] = {"What is very acidic?", "What is acidic?"};
    Backends b(std::make_shared<MockBackend>(tables));
    const auto r = b.generate_questions("coffee", "coffee is very acidic.", 1, 1);
    ASSERT_EQ(r.questions.size(), 1u);
    EXPECT_EQ(r.questions[0].text, "What is very acidic?");
}

TEST(Generate, Preconditions) {
    auto b = walkthrough();
    EXPECT_THROW(b.generate_questions("tea", "coffee is acidic.", 5, 5), PreconditionError);
    EXPECT_THROW(b.generate_questions("coffee", "coffee is acidic.", 2, 5), PreconditionError);
    EXPECT_THROW(b.generate_questions("coffee", "coffee is acidic.", 5, 0), PreconditionError);
}

TEST(Generate, EmptyGenerationIsNotAnError) {
    const auto r = walkthrough().generate_questions("acidic", "coffee is acidic but sweet.", 5, 5);
    EXPECT_TRUE(r.questions.empty());
}

TEST(Answer, PandaConservation) {
    const auto r = walkthrough().answer_question("What are they reliant on?",
                                                 "The giant panda is a conservation reliant vulnerable species.");
    ASSERT_TRUE(r.answer);
    EXPECT_EQ(r.answer->text, "conservation");
}

TEST(Answer, VeryAcidicIsUnanswerableOnSlightlyAcidicKnowledge) {
    const auto r = walkthrough().answer_question(
        "What is very acidic?",
        "Coffee is slightly acidic and has a stimulating effect on humans because of its caffeine content.");
    EXPECT_FALSE(r.answer);
}

TEST(Answer, UnknownQuestionGivesNoAnswerWithZeroConfidence) {
    auto tables = testing::walkthrough_tables();
    tables.qa.templates = false;
    Backends b(std::make_shared<MockBackend>(tables));
    const auto r = b.answer_question("Who painted it?", "Somebody painted it.");
    EXPECT_FALSE(r.answer);
    EXPECT_EQ(r.confidence, 0.0);
}

TEST(Answer, RhcpLosAngeles) {
    const auto r = walkthrough().answer_question("Where were the Red Hot Chili Peppers formed?",
                                                 "The Red Hot Chili Peppers are an American rock band formed in Los "
                                                 "Angeles in 1982.");
    ASSERT_TRUE(r.answer);
    EXPECT_EQ(r.answer->text, "Los Angeles");
}

TEST(Nli, AliasEntailment) {
    const auto v = walkthrough().classify_nli("Where were the Red Hot Chili Peppers formed? Los Angeles",
                                              "Where were the Red Hot Chili Peppers formed? LA");
    EXPECT_EQ(v.label, NliLabel::entailment);
}

TEST(Nli, ReflexiveEntailment) {
    EXPECT_EQ(walkthrough().classify_nli("Anything at all.", "Anything at all.").label, NliLabel::entailment);
}

TEST(Nli, DogContradiction) {
    EXPECT_EQ(walkthrough().classify_nli("I have a dog", "I do not have a dog").label, NliLabel::contradiction);
    // The negation rule reaches the same verdict without the explicit table entry.
    Backends plain(std::make_shared<MockBackend>(MockTables{}));
    EXPECT_EQ(plain.classify_nli("I have a dog.", "I don't have a dog.").label, NliLabel::contradiction);
}

TEST(Nli, VerdictProbabilitiesAreConsistent) {
    const auto v = walkthrough().classify_nli("a b c", "d e f");
    EXPECT_EQ(v.label, NliLabel::neutral);
    double sum = 0;
    for (double p : v.probabilities)
        sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(std::max_element(v.probabilities.begin(), v.probabilities.end()) - v.probabilities.begin(),
              static_cast<long>(NliLabel::neutral));
}

TEST(Mock, RepeatedCallsAgree) {
    MockBackend m(testing::walkthrough_tables());
    const auto req = wire::generate_request("coffee", "coffee is very acidic.", 5, 5);
    EXPECT_EQ(m.call(kGenerate, req), m.call(kGenerate, req));
}

TEST(Mock, TablesRoundTripThroughJson) {
    const auto t = testing::walkthrough_tables();
    const auto again = MockTables::from_json(t.to_json());
    EXPECT_EQ(again.to_json(), t.to_json());
    EXPECT_THROW(MockTables::from_json(json::array()), SchemaError);
    EXPECT_THROW(MockTables::from_json(json{{"nli", {{"default", "perhaps"}}}}), SchemaError);
}

TEST(BertScore, AbsentBackendIsSkipped) {
    Backends b;
    b.set(kNli, std::make_shared<MockBackend>(MockTables{}));
    EXPECT_FALSE(b.bertscore("x", "y"));
    Backends all(std::make_shared<MockBackend>(MockTables{}));
    EXPECT_EQ(all.bertscore("x", "y"), 0.5);
    EXPECT_EQ(all.bertscore("same", "same"), 1.0);
}

// ----- wire validation ------------------------------------------------------

TEST(Wire, AnnotationSpanMustSliceVerify) {
    json reply = {{"entities", json::array()},
                  {"noun_phrases", {{{"text", "coffee"}, {"start", 1}, {"end", 7}}}}};
    Backends b(std::make_shared<CannedTransport>(reply));
    EXPECT_THROW(b.annotate_spans("coffee is acidic"), ProtocolError);
    reply["noun_phrases"][0]["end"] = 99;
    Backends c(std::make_shared<CannedTransport>(reply));
    EXPECT_THROW(c.annotate_spans("coffee is acidic"), ProtocolError);
}

TEST(Wire, QuestionsMustRespectTopNAndOrdering) {
    json too_many = {{"questions", {{{"text", "a"}, {"score", 0}}, {{"text", "b"}, {"score", -1}}}}};
    EXPECT_THROW(wire::decode_questions(too_many, 1), ProtocolError);
    json unordered = {{"questions", {{{"text", "a"}, {"score", -1}}, {{"text", "b"}, {"score", 0}}}}};
    EXPECT_THROW(wire::decode_questions(unordered, 5), ProtocolError);
    EXPECT_EQ(wire::decode_questions(json{{"questions", json::array()}}, 5).questions.size(), 0u);
}

TEST(Wire, AnswerChecks) {
    EXPECT_THROW(wire::decode_answer(json{{"answer", nullptr}, {"confidence", 1.5}}, "ctx"), ProtocolError);
    EXPECT_THROW(wire::decode_answer(json{{"answer", {{"text", "x"}, {"start", 0}, {"end", 1}}}, {"confidence", 1}},
                                     "ctx"),
                 ProtocolError);
    const auto ok =
        wire::decode_answer(json{{"answer", {{"text", "tx"}, {"start", 1}, {"end", 3}}}, {"confidence", 0.4}}, "ctx");
    ASSERT_TRUE(ok.answer);
    EXPECT_EQ(ok.answer->text, "tx");
}

TEST(Wire, NliChecks) {
    json good = {{"label", "contradiction"},
                 {"probabilities", {{"entailment", 0.1}, {"neutral", 0.2}, {"contradiction", 0.7}}}};
    EXPECT_EQ(wire::decode_nli(good).label, NliLabel::contradiction);
    json bad_sum = good;
    bad_sum["probabilities"]["neutral"] = 0.3;
    EXPECT_THROW(wire::decode_nli(bad_sum), ProtocolError);
    json not_argmax = good;
    not_argmax["label"] = "neutral";
    EXPECT_THROW(wire::decode_nli(not_argmax), ProtocolError);
    EXPECT_THROW(wire::decode_nli(json{{"label", "maybe"}}), ProtocolError);
    EXPECT_THROW(wire::decode_nli(json::array()), ProtocolError);
}

TEST(Wire, EncodeDecodeRoundTrip) {
    MockBackend m(testing::walkthrough_tables());
    const std::string text = "Madonna drinks coffee in New York City";
    const auto a = m.annotate(text);
    const auto back = wire::decode_annotation(wire::encode(a), text);
    EXPECT_EQ(back.entities, a.entities);
    EXPECT_EQ(back.noun_phrases, a.noun_phrases);
    EXPECT_EQ(back.parses, a.parses);
}

// ----- transcript -----------------------------------------------------------

TEST(Transcript, RecordThenReplayIsByteIdentical) {
    auto live = std::make_shared<MockBackend>(testing::walkthrough_tables());
    auto recorder = std::make_shared<Transcript>(TranscriptMode::record);
    TranscriptTransport rec(recorder, live);
    const auto req = wire::answer_request("What are they reliant on?", "The giant panda is a conservation reliant "
                                                                       "vulnerable species.");
    const auto first = rec.call(kAnswer, req);

    const auto dir = testing::scratch_dir("transcript_replay");
    recorder->save(dir / "t.jsonl");
    auto replayer = Transcript::load(dir / "t.jsonl", TranscriptMode::replay);
    TranscriptTransport rep(replayer, nullptr);
    EXPECT_EQ(rep.call(kAnswer, req).dump(), first.dump());
}

TEST(Transcript, ReplayMissNamesCapabilityAndHash) {
    auto t = std::make_shared<Transcript>(TranscriptMode::replay);
    TranscriptTransport rep(t, std::make_shared<MockBackend>(MockTables{}));
    const auto req = wire::nli_request("p", "h");
    try {
        rep.call(kNli, req);
        FAIL() << "expected CacheMissError";
    } catch (const CacheMissError &e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("nli"), std::string::npos);
        EXPECT_NE(msg.find(request_hash(kNli, req)), std::string::npos);
    }
}

TEST(Transcript, ReplayNeverCallsLive) {
    auto canned = std::make_shared<CannedTransport>(json{{"f1", 0.3}});
    auto t = std::make_shared<Transcript>(TranscriptMode::replay);
    TranscriptTransport rep(t, canned);
    EXPECT_THROW(rep.call(kBertScore, wire::bertscore_request("a", "b")), CacheMissError);
    EXPECT_EQ(canned->calls.load(), 0);
}

TEST(Transcript, RecordCallsLiveOncePerRequest) {
    auto canned = std::make_shared<CannedTransport>(json{{"f1", 0.3}});
    auto t = std::make_shared<Transcript>(TranscriptMode::record);
    TranscriptTransport rec(t, canned);
    for (int i = 0; i < 3; ++i)
        rec.call(kBertScore, wire::bertscore_request("a", "b"));
    EXPECT_EQ(canned->calls.load(), 1);
    EXPECT_EQ(t->size(), 1u);
}

TEST(Transcript, PassthroughStoresNothing) {
    auto canned = std::make_shared<CannedTransport>(json{{"f1", 0.3}});
    auto t = std::make_shared<Transcript>(TranscriptMode::passthrough);
    TranscriptTransport pass(t, canned);
    pass.call(kBertScore, wire::bertscore_request("a", "b"));
    pass.call(kBertScore, wire::bertscore_request("a", "b"));
    EXPECT_EQ(canned->calls.load(), 2);
    EXPECT_EQ(t->size(), 0u);
}

TEST(Transcript, CanonicallyEqualBodiesHashTheSame) {
    const auto a = json::parse(R"({"premise": "p",   "hypothesis":"h"})");
    const auto b = json::parse("{\n  \"hypothesis\" : \"h\",\n  \"premise\" : \"p\"\n}");
    EXPECT_EQ(request_hash(kNli, a), request_hash(kNli, b));
    EXPECT_NE(request_hash(kNli, a), request_hash(kAnswer, a));
    EXPECT_EQ(canonical_json(a), R"({"hypothesis":"h","premise":"p"})");
}

TEST(Transcript, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Transcript, SaveIsSortedAndStable) {
    auto live = std::make_shared<MockBackend>(MockTables{});
    const auto dir = testing::scratch_dir("transcript_sorted");
    std::string first_bytes;
    for (int round = 0; round < 2; ++round) {
        auto t = std::make_shared<Transcript>(TranscriptMode::record);
        TranscriptTransport rec(t, live);
        // Insertion order differs between rounds.
        for (int i = 0; i < 10; ++i) {
            const int k = round == 0 ? i : 9 - i;
            rec.call(kNli, wire::nli_request("p" + std::to_string(k), "h"));
        }
        t->save(dir / "t.jsonl");
        const auto bytes = testing::slurp(dir / "t.jsonl");
        if (round == 0)
            first_bytes = bytes;
        else
            EXPECT_EQ(bytes, first_bytes);
    }
}

TEST(Transcript, ConcurrentRecordingIsConsistent) {
    auto live = std::make_shared<MockBackend>(MockTables{});
    auto t = std::make_shared<Transcript>(TranscriptMode::record);
    auto rec = std::make_shared<TranscriptTransport>(t, live);
    std::vector<std::jthread> threads;
    for (int w = 0; w < 4; ++w)
        threads.emplace_back([rec] {
            for (int i = 0; i < 50; ++i)
                rec->call(kNli, wire::nli_request("p" + std::to_string(i % 25), "h"));
        });
    threads.clear();
    EXPECT_EQ(t->size(), 25u);
}

TEST(Transcript, LoadErrors) {
    EXPECT_THROW(Transcript::load("/nonexistent/t.jsonl", TranscriptMode::replay), IoError);
    EXPECT_EQ(Transcript::load("/nonexistent/t.jsonl", TranscriptMode::record)->size(), 0u);
    const auto dir = testing::scratch_dir("transcript_bad");
    std::ofstream(dir / "bad.jsonl") << "{\"hash\":\"x\"}\n";
    EXPECT_THROW(Transcript::load(dir / "bad.jsonl", TranscriptMode::replay), SchemaError);
    std::ofstream(dir / "worse.jsonl") << "not json\n";
    EXPECT_THROW(Transcript::load(dir / "worse.jsonl", TranscriptMode::replay), ParseError);
}

} // namespace
} // namespace q2::backends

#include "check.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "clarifier/eval.hpp"
#include "clarifier/serialize.hpp"
#include "clarifier/text.hpp"
#include "fixtures.hpp"

using namespace clarifier;
using namespace clarifier::eval;

namespace {

AttributeTruth attr(const std::string& name, const std::string& value, Priority p = Priority::Important) {
    AttributeTruth a;
    a.attribute = name;
    a.value = value;
    a.priority = p;
    return a;
}

DialogueHistory asked(std::initializer_list<std::string> questions) {
    DialogueHistory h;
    for (const auto& q : questions) h.append({q, "x", ""});
    return h;
}

struct MiniBench {
    std::filesystem::path manifest;
    std::vector<BenchmarkSample> samples;
    Providers providers;
    json expected;
};

const MiniBench& mini_bench() {
    static const MiniBench mb = [] {
        MiniBench m;
        const auto dir = clarifier::testing::temp_dir("eval_mini_bench");
        m.manifest = clarifier::testing::prepare_mini_bench(dir);
        m.samples = load_manifest(m.manifest);
        m.providers = clarifier::testing::scripted_providers(dir / "transcript.json");
        std::ifstream in(dir / "expected_report.json");
        m.expected = json::parse(in);
        return m;
    }();
    return mb;
}

}  // namespace

TEST_CASE("Disentangle.SplitsConjunctions") {
    const auto units = disentangle_questions(asked({"What's your budget and who is it for?", "What is the occasion?"}));
    CHECK_EQ(units, (std::vector<std::string>{"budget?", "recipient?", "occasion?"}));
}

TEST_CASE("Disentangle.DeduplicatesAndKeepsUnknown") {
    const auto units = disentangle_questions(asked({"What is your budget?", "How much can you spend?", "Any allergies?"}));
    CHECK_EQ(units, (std::vector<std::string>{"budget?", "Any allergies?"}));
    CHECK(disentangle_questions({}).empty());
}

TEST_CASE("Disentangle.ViaProvider") {
    ScriptedChat chat;
    const auto h = asked({"Q one?"});
    chat.set("disentangle:" + text::slug("- Q one?\n"), R"({"units": ["a?", "b?", "a?"]})");
    CHECK_EQ(disentangle_questions(h, &chat), (std::vector<std::string>{"a?", "b?"}));
}

TEST_CASE("Persona.Answers") {
    const std::vector<AttributeTruth> truth{attr("budget", "about 50 dollars"), attr("recipient", "my sister")};
    const Persona coop;
    CHECK_EQ(coop.answer("What is your budget?", truth), "about 50 dollars");
    CHECK_EQ(coop.answer("What's your budget and who is it for?", truth), "about 50 dollars; my sister");
    CHECK_EQ(coop.answer("What colour do you like?", truth), "I'm not sure");
    CHECK_EQ(Persona(Persona::Kind::Evasive).answer("What is your budget?", truth), "I'm not sure");
}

TEST_CASE("Match.TwoOfThree") {
    std::vector<AttributeTruth> gt{attr("budget", ""), attr("recipient", ""), attr("occasion", "")};
    const auto rc = match_recovered({"budget?", "recipient?"}, gt, TokenF1Judge{});
    CHECK_EQ(rc.recovered, 2);
    CHECK_EQ(rc.total, 3);
    CHECK_NEAR(rc.rate(), 2.0 / 3.0, 1e-12);
    CHECK_THROWS_AS(match_recovered({"x"}, {}, TokenF1Judge{}), Error);
}

TEST_CASE("Match.ThresholdIsInclusive") {
    // "red water bottle" vs "a red bottle of water" scores 6/7 ~ 0.857
    std::vector<AttributeTruth> gt{attr("a red bottle of water", "")};
    CHECK_EQ(match_recovered({"red water bottle"}, gt, TokenF1Judge{}, 6.0 / 7.0).recovered, 1);
    CHECK_EQ(match_recovered({"red water bottle"}, gt, TokenF1Judge{}, 0.86).recovered, 0);
}

TEST_CASE("GuidanceScore.Examples") {
    using D = Direction;
    const DirectionSet gold{D::Left, D::Up};
    auto s = score_guidance({{D::Left, D::Up}}, gold);
    CHECK_EQ(s.strict, 1);
    CHECK_EQ(s.loose, 1);
    s = score_guidance({{D::Left}}, gold);
    CHECK_EQ(s.strict, 0);
    CHECK_EQ(s.loose, 1);
    s = score_guidance({{D::Closer}, {D::Steady}}, gold);
    CHECK_EQ(s.strict, 0);
    CHECK_EQ(s.loose, 0);
    s = score_guidance({{D::Closer}, {D::Up, D::Left}}, gold);
    CHECK_EQ(s.strict, 1);
    CHECK_THROWS_AS(score_guidance({}, {}), Error);
}

TEST_CASE("Loader.AliasesAndDefaults") {
    const std::filesystem::path base = "/data";
    auto s = sample_from_json(json::parse(R"({"sample_id": 7, "instruction": "Plan a trip", "vague": true,
        "missing_details": [{"description": "destination", "importance": "3"}, "dates"]})"), base);
    CHECK_EQ(s.id, "7");
    CHECK_EQ(s.modality, Modality::Text);
    REQUIRE_EQ(s.gt_missing_attrs.size(), 2u);
    CHECK_EQ(s.gt_missing_attrs[0].attribute, "destination");
    CHECK_EQ(s.gt_missing_attrs[0].priority, Priority::Critical);
    CHECK_EQ(s.gt_missing_attrs[1].attribute, "dates");

    s = sample_from_json(json::parse(R"({"id": "v", "question": "Is this ripe?", "rgb": "img/a.png", "target_object": "cup",
        "needs_vision_clarification": false})"), base);
    CHECK_EQ(s.modality, Modality::Visual);
    CHECK_EQ(*s.image, base / "img/a.png");
    REQUIRE(s.gt_guidance.has_value());
    CHECK(s.gt_guidance->empty());

    s = sample_from_json(json::parse(R"({"id": "r", "question": "What is that?", "image": "/abs.png",
        "has_pointing": true, "guidance": "Move the camera up"})"), base);
    CHECK_EQ(s.modality, Modality::Referential);
    CHECK_EQ(*s.image, std::filesystem::path("/abs.png"));

    CHECK_THROWS_AS(sample_from_json(json::parse(R"({"id": "x", "query": "hi"})"), base), Error);  // text without gt_vague
    const auto round = sample_from_json(sample_to_json(s), base);
    CHECK_EQ(sample_to_json(round), sample_to_json(s));
}

TEST_CASE("Loader.DuplicateIdsRejected") {
    const auto dir = clarifier::testing::temp_dir("eval_dup");
    std::ofstream(dir / "m.jsonl") << R"({"id": "a", "query": "q", "gt_vague": false})" << "\n"
                                   << R"({"id": "a", "query": "q2", "gt_vague": true})" << "\n";
    try {
        load_manifest(dir / "m.jsonl");
        FAIL("expected MalformedAsset");
    } catch (const Error& e) {
        CHECK_EQ(e.code(), ErrorCode::MalformedAsset);
    }
    std::ofstream(dir / "arr.json") << R"([{"id": "a", "query": "q", "gt_vague": false}])";
    CHECK_EQ(load_manifest(dir / "arr.json").size(), 1u);
}

TEST_CASE("Aggregate.OrderIndependent") {
    std::vector<SampleRecord> recs(5);
    for (int i = 0; i < 5; ++i) {
        recs[i].id = "s" + std::to_string(i);
        recs[i].vagueness = {i % 2, 1};
        recs[i].semantic_answer = {i % 3 == 0 ? 1 : 0, 1};
        recs[i].answer_score = 0.1 * i;
    }
    const auto a = aggregate(recs).to_json();
    std::mt19937 rng(3);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(recs.begin(), recs.end(), rng);
        CHECK_EQ(aggregate(recs).to_json(), a);
    }
    CHECK_EQ(a.at("metrics").at("vagueness_accuracy").at("numerator"), 2);
    CHECK_FALSE(aggregate({}).mean_semantic_score().has_value());
}

TEST_CASE("MiniBench.MatchesHandComputedReport") {
    const auto& mb = mini_bench();
    REQUIRE_EQ(mb.samples.size(), 10u);
    EvalConfig cfg;
    cfg.threads = 2;
    const auto report = evaluate(mb.samples, SystemKind::Clarifier, mb.providers, cfg);
    const auto diffs = clarifier::testing::compare_report(report, mb.expected);
    std::string all;
    for (const auto& d : diffs) all += d + "\n";
    INFO(all);
    CHECK(diffs.empty());
    CHECK_LE(report.strict_recover_rate.numerator, report.loose_recover_rate.numerator);
}

TEST_CASE("MiniBench.ShuffleAndThreadInvariant") {
    const auto& mb = mini_bench();
    EvalConfig cfg;
    cfg.threads = 1;
    const json base = evaluate(mb.samples, SystemKind::Clarifier, mb.providers, cfg).to_json();
    auto shuffled = mb.samples;
    std::mt19937 rng(11);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    cfg.threads = 4;
    CHECK_EQ(evaluate(shuffled, SystemKind::Clarifier, mb.providers, cfg).to_json(), base);
}

TEST_CASE("MiniBench.GoldenCliReportAgrees") {
    std::ifstream in(clarifier::testing::golden_dir() / "mini_bench_report.json");
    REQUIRE(in.good());
    const json golden = json::parse(in);
    const auto& mb = mini_bench();
    const json fresh = evaluate(mb.samples, SystemKind::Clarifier, mb.providers).to_json();
    CHECK_EQ(golden.at("metrics"), fresh.at("metrics"));
}

TEST_CASE("SimulatedWorld.RoundsEqualMissingCount") {
    for (int m = 0; m <= 4; ++m) {
        std::vector<AttributeTruth> truth;
        const char* names[] = {"budget", "recipient", "occasion", "color"};
        for (int i = 0; i < m; ++i) truth.push_back(attr(names[i], std::string("value") + char('a' + i)));
        BenchmarkSample s;
        s.id = "w" + std::to_string(m);
        s.query = "Help me";
        s.gt_vague = m > 0;
        s.gt_missing_attrs = truth;
        const SimulatedWorldChat chat({{s.id, truth}});
        const auto log = simulate_interaction(s, SystemKind::Clarifier, Persona{}, chat);
        CHECK_EQ(log.rounds, m);
        CHECK_FALSE(log.capped);
        if (m > 0) {
            const auto units = disentangle_questions(log.history);
            CHECK_EQ(match_recovered(units, truth, TokenF1Judge{}).recovered, m);
        }
    }
}

TEST_CASE("SimulatedWorld.EvasiveHitsCap") {
    const std::vector<AttributeTruth> truth{attr("budget", "50", Priority::Critical)};
    BenchmarkSample s;
    s.id = "e";
    s.query = "Buy something";
    s.gt_vague = true;
    s.gt_missing_attrs = truth;
    const SimulatedWorldChat chat({{"e", truth}});
    EvalConfig cfg;
    cfg.pipeline.dialogue.max_rounds = 4;
    const auto log = simulate_interaction(s, SystemKind::Clarifier, Persona(Persona::Kind::Evasive), chat, cfg);
    CHECK_EQ(log.rounds, 4);
    CHECK(log.capped);
}

TEST_CASE("Monolithic.AsksAtMostOnce") {
    ScriptedChat chat;
    chat.set("mono:m1", "What's your budget and who is it for?");
    chat.set("mono:m2", "Here are three gift ideas.");
    BenchmarkSample s;
    s.query = "Buy a gift";
    s.gt_vague = true;
    s.gt_missing_attrs = {attr("budget", "50")};
    s.id = "m1";
    CHECK_EQ(simulate_interaction(s, SystemKind::Monolithic, Persona{}, chat).rounds, 1);
    s.id = "m2";
    CHECK_EQ(simulate_interaction(s, SystemKind::Monolithic, Persona{}, chat).rounds, 0);
}

#include "check.hpp"

#include "clarifier/dialogue.hpp"

using namespace clarifier;

namespace {

json analysis(json known, json missing) { return json{{"known", std::move(known)}, {"missing", std::move(missing)}}; }

json miss(const std::string& attr, const std::string& prio) {
    return json{{"attribute", attr}, {"priority", prio}, {"rationale", "needed"}};
}

UserRequest req(const std::string& id, const std::string& text) {
    UserRequest u;
    u.text = text;
    u.script_id = id;
    return u;
}

/// Three-item world: budget (critical), recipient (important), wrapping (optional).
std::shared_ptr<ScriptedChat> gift_chat() {
    auto c = std::make_shared<ScriptedChat>();
    c->set("analyze:gift/0", analysis(json::array(), {miss("recipient", "important"), miss("budget", "critical"),
                                                      miss("wrapping", "optional")}));
    c->set("analyze:gift/1", analysis({{{"attribute", "budget"}, {"value", "50 dollars"}}},
                                      {miss("recipient", "important"), miss("wrapping", "optional")}));
    c->set("analyze:gift/2", analysis({{{"attribute", "budget"}, {"value", "50 dollars"}},
                                       {{"attribute", "recipient"}, {"value", "my sister"}}},
                                      {miss("wrapping", "optional")}));
    c->set("ask:gift/budget", "What is your budget?");
    c->set("ask:gift/recipient", "Who is the gift for?");
    c->set("summarize:gift", R"({"task": "Buy a gift for my sister under 50 dollars"})");
    return c;
}

}  // namespace

TEST_CASE("Dialogue.AnalyzeGiftRequest") {
    const auto chat = gift_chat();
    const auto a = analyze_intent(req("gift", "I want to buy a gift"), {}, *chat);
    REQUIRE_EQ(a.missing.size(), 3u);
    CHECK(a.known.empty());
    CHECK_EQ(a.missing[1].attribute, "budget");
    CHECK_EQ(a.missing[1].priority, Priority::Critical);
}

TEST_CASE("Dialogue.RepairRetriesThenSucceeds") {
    ScriptedChat chat;
    chat.set("analyze:r/0", json::array({"sorry, here you go", "{\"missing\": [{\"attribute\": \"x\"}]}",
                                         analysis(json::array(), {miss("time", "critical")}).dump()}));
    const auto a = analyze_intent(req("r", "Book it"), {}, chat);
    REQUIRE_EQ(a.missing.size(), 1u);
    CHECK_EQ(a.missing[0].attribute, "time");
}

TEST_CASE("Dialogue.RepairBudgetExhausted") {
    ScriptedChat chat;
    chat.set("analyze:r/0", json::array({"nope", "still nope", "no", "{\"known\": [], \"missing\": []}"}));
    try {
        analyze_intent(req("r", "Book it"), {}, chat);
        FAIL("expected UnparseableAnalysis");
    } catch (const Error& e) {
        CHECK_EQ(e.code(), ErrorCode::UnparseableAnalysis);
    }
    DialogueConfig more;
    more.max_repairs = 3;
    CHECK(analyze_intent(req("r", "Book it"), {}, chat, more).missing.empty());
}

TEST_CASE("Dialogue.DuplicateAttributesAreUnparseable") {
    ScriptedChat chat;
    chat.set("analyze:d/0", analysis({{{"attribute", "time"}, {"value", "6pm"}}}, {miss("time", "critical")}));
    CHECK_THROWS_AS(analyze_intent(req("d", "Book it"), {}, chat), Error);
}

TEST_CASE("Dialogue.SelectNext") {
    IntentAnalysis a;
    CHECK_FALSE(select_next(a).has_value());
    a.missing = {{"w", Priority::Optional, ""}};
    CHECK_FALSE(select_next(a).has_value());
    a.missing = {{"a", Priority::Important, ""}, {"b", Priority::Critical, ""}, {"c", Priority::Critical, ""}};
    CHECK_EQ(select_next(a)->attribute, "b");  // first critical wins the tie
    a.missing = {{"a", Priority::Important, ""}, {"z", Priority::Optional, ""}, {"q", Priority::Important, ""}};
    CHECK_EQ(select_next(a)->attribute, "a");
}

TEST_CASE("Dialogue.TwoRoundsCriticalFirst") {
    std::vector<std::string> asked;
    const auto out = run_clarification(
        req("gift", "I want to buy a gift"),
        [&](const PendingQuestion& q) -> std::optional<std::string> {
            asked.push_back(q.item.attribute);
            return q.item.attribute == "budget" ? "50 dollars" : "my sister";
        },
        gift_chat());
    CHECK_EQ(out.rounds, 2);
    CHECK_EQ(out.terminated_by, Termination::Resolved);
    CHECK_EQ(asked, (std::vector<std::string>{"budget", "recipient"}));
    REQUIRE_EQ(out.summary.resolved.size(), 2u);
    CHECK_EQ(out.summary.resolved[0], (KnownItem{"budget", "50 dollars"}));
    CHECK_EQ(out.summary.resolved[1], (KnownItem{"recipient", "my sister"}));
    CHECK(out.summary.unresolved.empty());
    REQUIRE_EQ(out.summary.deferred.size(), 1u);
    CHECK_EQ(out.summary.deferred[0].attribute, "wrapping");
    CHECK_EQ(out.summary.task, "Buy a gift for my sister under 50 dollars");
    CHECK_EQ(out.history.turns[0].question, "What is your budget?");
}

TEST_CASE("Dialogue.RoundCap") {
    auto chat = std::make_shared<ScriptedChat>();
    for (int i = 0; i < 5; ++i) chat->set("analyze:loop/" + std::to_string(i), analysis(json::array(), {miss("size", "critical")}));
    chat->set("ask:loop/size", "What size?");
    chat->set("summarize:loop", "Find a shirt");
    DialogueConfig cfg;
    cfg.max_rounds = 3;
    const auto out = run_clarification(
        req("loop", "Find a shirt"), [](const PendingQuestion&) { return std::optional<std::string>("not sure"); }, chat, cfg);
    CHECK_EQ(out.rounds, 3);
    CHECK_EQ(out.terminated_by, Termination::RoundCap);
    REQUIRE_EQ(out.summary.unresolved.size(), 1u);
    CHECK(out.summary.resolved.empty());  // still missing after the answers
    CHECK_EQ(out.summary.task, "Find a shirt");
}

TEST_CASE("Dialogue.ZeroRoundCapAsksNothing") {
    auto chat = gift_chat();
    DialogueConfig cfg;
    cfg.max_rounds = 0;
    int calls = 0;
    const auto out = run_clarification(
        req("gift", "I want to buy a gift"), [&](const PendingQuestion&) { ++calls; return std::optional<std::string>("x"); },
        chat, cfg);
    CHECK_EQ(calls, 0);
    CHECK_EQ(out.terminated_by, Termination::RoundCap);
}

TEST_CASE("Dialogue.UserAbort") {
    const auto out = run_clarification(
        req("gift", "I want to buy a gift"), [](const PendingQuestion&) { return std::optional<std::string>(); },
        gift_chat());
    CHECK_EQ(out.terminated_by, Termination::UserAbort);
    CHECK_EQ(out.rounds, 0);
}

TEST_CASE("Dialogue.ProviderFailureKeepsPartialHistory") {
    auto chat = gift_chat();
    auto broken = std::make_shared<ScriptedChat>(*chat);
    broken->set("analyze:gift/1", json::array({"x"}));  // never parses
    try {
        run_clarification(
            req("gift", "I want to buy a gift"), [](const PendingQuestion&) { return std::optional<std::string>("50"); },
            broken);
        FAIL("expected DialogueError");
    } catch (const DialogueError& e) {
        CHECK_EQ(e.code(), ErrorCode::UnparseableAnalysis);
        CHECK_EQ(e.partial_history().size(), 1u);
    }
}

TEST_CASE("Dialogue.SessionStepwise") {
    ClarificationSession s(req("gift", "I want to buy a gift"), gift_chat());
    CHECK_FALSE(s.started());
    CHECK_THROWS_AS(s.answer("too early"), Error);
    auto q = s.start();
    REQUIRE(q.has_value());
    CHECK_EQ(q->round, 1);
    CHECK_EQ(q->item.attribute, "budget");
    q = s.answer("50 dollars");
    REQUIRE(q.has_value());
    CHECK_EQ(q->round, 2);
    CHECK_FALSE(s.finished());
    q = s.answer("my sister");
    CHECK_FALSE(q.has_value());
    CHECK(s.finished());
    CHECK_EQ(s.outcome().rounds, 2);
    CHECK_THROWS_AS(s.abort(), Error);
}

TEST_CASE("Dialogue.Vagueness") {
    ScriptedChat chat;
    chat.set("vague:a", R"({"vague": true, "rationale": "no budget"})");
    chat.set("vague:b", "```json\n{\"vague\": false}\n```");
    CHECK(judge_vagueness(req("a", "Buy a gift"), chat).vague);
    CHECK_FALSE(judge_vagueness(req("b", "Set a timer for 5 minutes"), chat).vague);
}

TEST_CASE("Dialogue.DefaultKeyIsSlug") {
    UserRequest u;
    u.text = "Plan a Trip!";
    CHECK_EQ(u.key(), "plan-a-trip");
    u.text = "  ";
    CHECK_THROWS_AS(u.validate(), Error);
}

TEST_CASE("Dialogue.HistoryJsonl") {
    DialogueHistory h;
    h.append({"Q1?", "A1", "budget"});
    h.append({"Q2?", "A2", "time"});
    const auto s = history_to_jsonl(h);
    CHECK_EQ(std::count(s.begin(), s.end(), '\n'), 2);
    const auto first = json::parse(s.substr(0, s.find('\n')));
    CHECK_EQ(first.at("question"), "Q1?");
}

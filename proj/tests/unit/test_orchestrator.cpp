#include "check.hpp"

#include "clarifier/orchestrator.hpp"
#include "clarifier/scenegen.hpp"
#include "fixtures.hpp"

using namespace clarifier;

namespace {

struct World {
    std::filesystem::path dir;
    scenegen::SceneBundle scene;
    std::shared_ptr<ScriptedChat> chat = std::make_shared<ScriptedChat>();
    Providers providers;

    World(const std::string& name, const scenegen::SceneSpec& spec) {
        dir = clarifier::testing::temp_dir("orch_" + name);
        scene = scenegen::generate(spec);
        scenegen::write_bundle(scene, dir);
        providers.chat = chat;
        providers.vlm = chat;
        providers.detector = std::make_shared<FileDetector>();
        providers.depth = std::make_shared<FileDepthEstimator>();
        providers.handseg = std::make_shared<FileHandSegmenter>();
        providers.judge = std::make_shared<TokenF1Judge>();
    }

    QueryBundle query(const std::string& text) const {
        QueryBundle b;
        b.text = text;
        b.image = std::make_shared<const RgbImage>(assets::load_image(dir / "image.png"));
        return b;
    }
};

scenegen::SceneSpec menu_spec(int x0, int y0, int x1, int y1) {
    scenegen::SceneSpec s;
    s.seed = 77;
    scenegen::TargetSpec t;
    t.label = "menu";
    t.x0 = x0;
    t.y0 = y0;
    t.x1 = x1;
    t.y1 = y1;
    t.depth = 1.5;
    t.period = 10;
    s.targets.push_back(t);
    return s;
}

std::set<std::string> stages(const PipelineOutcome& o) {
    std::set<std::string> out;
    for (const auto& r : o.trace) out.insert(r.stage);
    return out;
}

}  // namespace

TEST_CASE("Orchestrator.Deictic") {
    CHECK(has_deictic("What is this?"));
    CHECK(has_deictic("how much is THAT one"));
    CHECK_FALSE(has_deictic("What does the menu say?"));
    CHECK_FALSE(has_deictic("Is thistle edible?"));
}

TEST_CASE("Orchestrator.TextOnlyVagueGoesSemantic") {
    World w("text", scenegen::SceneSpec{});
    w.chat->set("vague:gift", R"({"vague": true})");
    QueryBundle b;
    b.text = "I want to buy a gift";
    b.script_id = "gift";
    CHECK_EQ(classify_ambiguity(b, w.providers), RouteSet{Route::Semantic});
}

TEST_CASE("Orchestrator.MenuGoesVisualAndAnswers") {
    World w("menu", menu_spec(200, 140, 440, 340));
    w.chat->set("entity:what-does-the-menu-say", R"({"label": "menu"})");
    w.chat->set("vague:what-does-the-menu-say", R"({"vague": false})");
    w.chat->set("vlm:scene_77:what-does-the-menu-say", "Soup of the day.");
    const auto out = run_pipeline(w.query("What does the menu say?"), w.providers);
    CHECK_EQ(out.routes, RouteSet{Route::Visual});
    CHECK_EQ(out.label.value_or(""), "menu");
    REQUIRE(out.assessment.has_value());
    CHECK(out.assessment->ok());
    CHECK(out.clarification_requests.empty());
    CHECK_EQ(out.answer.value_or(""), "Soup of the day.");
    const auto s = stages(out);
    for (const char* st : {"entity_extraction", "vagueness_judgement", "detection", "feedback_generation", "llm_processing"}) {
        CHECK(s.contains(st));
    }
    CHECK_FALSE(s.contains("ray_intersection"));
}

TEST_CASE("Orchestrator.BlurredTargetAsksToHoldSteady") {
    World w("blur", menu_spec(200, 140, 440, 340));
    const auto blurred = scenegen::gen_blur_series(w.scene.image, {6.0}).front();
    assets::save_image(blurred, w.dir / "image.png");
    w.chat->set("entity:what-does-the-menu-say", R"({"label": "menu"})");
    w.chat->set("vague:what-does-the-menu-say", R"({"vague": false})");
    const auto out = run_pipeline(w.query("What does the menu say?"), w.providers);
    CHECK_FALSE(out.answer.has_value());
    REQUIRE_FALSE(out.clarification_requests.empty());
    bool hold = false;
    for (const auto& r : out.clarification_requests) {
        CHECK_EQ(r.kind, ClarificationRequest::Kind::Guidance);
        hold |= r.code == "hold_steady";
    }
    CHECK(hold);
}

TEST_CASE("Orchestrator.ClippedTargetAsksToPan") {
    World w("clip", menu_spec(0, 100, 200, 300));
    w.chat->set("entity:what-does-the-menu-say", R"({"label": "menu"})");
    w.chat->set("vague:what-does-the-menu-say", R"({"vague": false})");
    const auto out = run_pipeline(w.query("What does the menu say?"), w.providers);
    REQUIRE_FALSE(out.clarification_requests.empty());
    CHECK_EQ(out.clarification_requests.front().code, "pan_left");
    CHECK_FALSE(out.answer.has_value());
}

TEST_CASE("Orchestrator.PointingGroundsAndAnswers") {
    World w("point", clarifier::testing::gesture_spec(6));
    w.chat->set("entity:what-is-this", R"({"label": null})");
    w.chat->set("vague:what-is-this", R"({"vague": false})");
    w.chat->set("vlm:scene_6:what-is-this", "A mug.");
    const auto out = run_pipeline(w.query("What is this?"), w.providers);
    CHECK_EQ(out.routes, (RouteSet{Route::Referential, Route::Visual}));
    REQUIRE(out.grounding.has_value());
    CHECK(out.grounding->hit.hit());
    CHECK(w.scene.gt.target_bbox->contains(out.grounding->hit.pixel));
    CHECK(out.grounding->context.contains(out.grounding->target));
    CHECK_EQ(out.answer.value_or(""), "A mug.");
    const auto s = stages(out);
    for (const char* st : {"hand_segmentation", "pose_detection", "depth_estimation", "pointing_fusion", "ray_intersection",
                           "adaptive_crop"}) {
        CHECK(s.contains(st));
    }
}

TEST_CASE("Orchestrator.PointingIntent") {
    World w("intent", clarifier::testing::gesture_spec(7));
    CHECK(pointing_intent_detect(w.query("What is this?"), w.providers));
    World none("nointent", scenegen::SceneSpec{});
    CHECK_FALSE(pointing_intent_detect(none.query("What is this?"), none.providers));
}

TEST_CASE("Orchestrator.PausesOnQuestionAndResumes") {
    World w("pause", scenegen::SceneSpec{});
    auto& c = *w.chat;
    c.set("vague:trip", R"({"vague": true})");
    c.set("analyze:trip/0", R"({"known": [], "missing": [{"attribute": "location", "priority": "critical", "rationale": ""}]})");
    c.set("analyze:trip/1", R"({"known": [{"attribute": "location", "value": "Rome"}], "missing": []})");
    c.set("ask:trip/location", "Where would you like to go?");
    c.set("summarize:trip", R"({"task": "Plan a trip to Rome"})");
    c.set("answer:trip", "Here is a plan for Rome.");
    QueryBundle b;
    b.text = "Plan a trip";
    b.script_id = "trip";
    PipelineRun run(b, w.providers);
    auto out = run.start();
    CHECK(out.awaiting_answer);
    CHECK(run.awaiting_answer());
    REQUIRE_EQ(out.clarification_requests.size(), 1u);
    CHECK_EQ(out.clarification_requests[0].kind, ClarificationRequest::Kind::Question);
    CHECK_EQ(out.clarification_requests[0].message, "Where would you like to go?");
    out = run.answer("Rome");
    CHECK_FALSE(out.awaiting_answer);
    CHECK_EQ(out.answer.value_or(""), "Here is a plan for Rome.");
    REQUIRE(out.dialogue.has_value());
    CHECK_EQ(out.dialogue->rounds, 1);
    CHECK_THROWS_AS(run.answer("again"), Error);
}

TEST_CASE("Orchestrator.AbortLeavesNoAnswer") {
    World w("abort", scenegen::SceneSpec{});
    auto& c = *w.chat;
    c.set("vague:trip", R"({"vague": true})");
    c.set("analyze:trip/0", R"({"known": [], "missing": [{"attribute": "location", "priority": "critical", "rationale": ""}]})");
    c.set("ask:trip/location", "Where?");
    c.set("summarize:trip", "Plan a trip");
    QueryBundle b;
    b.text = "Plan a trip";
    b.script_id = "trip";
    PipelineRun run(b, w.providers);
    run.start();
    const auto out = run.abort();
    CHECK_FALSE(out.answer.has_value());
    REQUIRE(out.dialogue.has_value());
    CHECK_EQ(out.dialogue->terminated_by, Termination::UserAbort);
}

TEST_CASE("Orchestrator.ProviderFailureBecomesFailureRequest") {
    World w("fail", menu_spec(200, 140, 440, 340));
    w.chat->set("entity:what-does-the-menu-say", R"({"label": "menu"})");
    w.chat->set("vague:what-does-the-menu-say", R"({"vague": false})");
    // no vlm entry scripted
    const auto out = run_pipeline(w.query("What does the menu say?"), w.providers);
    REQUIRE_EQ(out.clarification_requests.size(), 1u);
    CHECK_EQ(out.clarification_requests[0].kind, ClarificationRequest::Kind::Failure);
    CHECK_EQ(out.clarification_requests[0].stage, "answer");
    CHECK_EQ(out.clarification_requests[0].code, "unknown_script_key");
}

TEST_CASE("Orchestrator.BundleValidation") {
    QueryBundle b;
    b.text = " ";
    CHECK_THROWS_AS(b.validate(), Error);
    b.text = "x";
    b.depth = DepthMap(4, 4, 1.0);
    CHECK_THROWS_AS(b.validate(), Error);
    b.image = std::make_shared<const RgbImage>(8, 8);
    CHECK_THROWS_AS(b.validate(), Error);  // size mismatch
}

TEST_CASE("Orchestrator.ConfigJsonMerge") {
    PipelineConfig c;
    from_json(json{{"cast", {{"step", 0.02}}}, {"dialogue", {{"max_rounds", 3}}}, {"hfov_deg", 60.0}}, c);
    CHECK_EQ(c.cast.step, 0.02);
    CHECK_EQ(c.cast.t_max, CastConfig{}.t_max);
    CHECK_EQ(c.dialogue.max_rounds, 3);
    CHECK_EQ(c.hfov_deg, 60.0);
    const json round = c;
    PipelineConfig d;
    from_json(round, d);
    CHECK_EQ(json(d), round);
    CHECK_THROWS_AS(from_json(json{{"cast", {{"step", -1.0}}}}, d), Error);
}

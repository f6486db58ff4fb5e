#include "clarifier/orchestrator.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <chrono>

#include "clarifier/serialize.hpp"
#include "clarifier/text.hpp"

namespace clarifier {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

const std::array<std::string_view, 7> kDeictic{"this", "that", "these", "those", "here", "there", "one"};

struct Classification {
    RouteSet routes;
    std::optional<HandMask> mask;
    std::optional<FingerAxis> axis;
    std::optional<std::string> label;
    std::vector<StageRecord> records;
};

UserRequest request_of(const QueryBundle& b) { return UserRequest{b.text, "en", b.script_id}; }

template <typename F>
auto timed(std::vector<StageRecord>& log, std::string stage, std::string route, F&& f) {
    const auto start = Clock::now();
    try {
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            log.push_back({std::move(stage), std::move(route), ms_since(start)});
        } else {
            auto result = f();
            log.push_back({std::move(stage), std::move(route), ms_since(start)});
            return result;
        }
    } catch (const Error& e) {
        log.push_back({std::move(stage), std::move(route), ms_since(start), "error", e.what()});
        throw;
    }
}

Classification classify(const QueryBundle& b, const Providers& p, const PipelineConfig& cfg) {
    b.validate();
    Classification c;

    if (b.image && has_deictic(b.text)) {
        try {
            c.mask = timed(c.records, "hand_segmentation", "classify", [&] {
                return b.hand_mask ? *b.hand_mask : p.handseg->segment(*b.image);
            });
            c.axis = timed(c.records, "pose_detection", "classify",
                           [&] { return extract_finger_keypoints(*c.mask, cfg.pointing); });
            c.routes.insert(Route::Referential);
        } catch (const Error& e) {
            spdlog::debug("no pointing gesture: {}", e.what());
        }
    }

    if (b.image) {
        try {
            c.label = timed(c.records, "entity_extraction", "classify", [&] { return extract_entity(*p.chat, b.text); });
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoEntity) spdlog::warn("entity extraction failed, visual route dropped: {}", e.what());
        }
        if (c.routes.contains(Route::Referential) || c.label) c.routes.insert(Route::Visual);
    }

    try {
        const auto v = timed(c.records, "vagueness_judgement", "classify", [&] { return judge_vagueness(request_of(b), *p.chat); });
        if (v.vague) c.routes.insert(Route::Semantic);
    } catch (const Error& e) {
        spdlog::warn("vagueness judgement failed, semantic route dropped: {}", e.what());
    }
    return c;
}

ClarificationRequest failure(const std::string& stage, const Error& e) {
    ClarificationRequest r;
    r.kind = ClarificationRequest::Kind::Failure;
    r.stage = stage;
    r.code = std::string(to_string(e.code()));
    r.message = e.what();
    return r;
}

ClarificationRequest guidance_request(const std::string& stage, const GuidanceMessage& g, std::string message = {}) {
    ClarificationRequest r;
    r.kind = ClarificationRequest::Kind::Guidance;
    r.stage = stage;
    r.guidance = g;
    r.code = std::string(to_string(g.code));
    r.message = message.empty() ? g.text : std::move(message);
    return r;
}

ClarificationRequest question_request(const PendingQuestion& q) {
    ClarificationRequest r;
    r.kind = ClarificationRequest::Kind::Question;
    r.stage = "semantic";
    r.question = q;
    r.code = "question";
    r.message = q.question;
    return r;
}

CameraIntrinsics intrinsics_for(const QueryBundle& b, const PipelineConfig& cfg) {
    if (b.intrinsics) return *b.intrinsics;
    const RgbImage& image = *b.image;
    double hfov = cfg.hfov_deg;
    if (!image.source.empty()) {
        const auto scene = assets::locate_scene(image.source);
        hfov = scene.hfov_deg;
        if (scene.intrinsics) return assets::load_intrinsics(*scene.intrinsics);
    }
    return CameraIntrinsics::from_fov(image.width, image.height, hfov);
}

std::string details_of(const ClarificationOutcome& d) {
    std::string out;
    for (const auto& k : d.summary.resolved) {
        if (!out.empty()) out += "; ";
        out += k.attribute + ": " + k.value;
    }
    return out;
}

}  // namespace

CameraIntrinsics resolve_intrinsics(const QueryBundle& bundle, const PipelineConfig& cfg) {
    require(bundle.image != nullptr, "intrinsics need an image");
    return intrinsics_for(bundle, cfg);
}

std::string_view to_string(Route r) {
    switch (r) {
        case Route::Semantic: return "semantic";
        case Route::Visual: return "visual";
        case Route::Referential: return "referential";
    }
    return "semantic";
}

void QueryBundle::validate() const {
    require(!text::trim(text).empty(), "query text must be non-empty");
    if (image) {
        require(!image->empty(), "query image must be non-empty");
        if (depth) require(depth->width == image->width && depth->height == image->height, "depth map and image differ in size");
        if (hand_mask) {
            require(hand_mask->width == image->width && hand_mask->height == image->height, "hand mask and image differ in size");
        }
        if (intrinsics) {
            intrinsics->validate();
            require(intrinsics->width == image->width && intrinsics->height == image->height,
                    "intrinsics and image differ in size");
        }
    } else {
        require(!depth && !hand_mask, "depth or hand mask given without an image");
    }
}

bool has_deictic(std::string_view s) {
    for (const auto& w : text::words(s)) {
        if (std::find(kDeictic.begin(), kDeictic.end(), w) != kDeictic.end()) return true;
    }
    return false;
}

bool pointing_intent_detect(const QueryBundle& bundle, const Providers& providers, const PointingConfig& cfg) {
    if (!bundle.image) return false;
    try {
        const HandMask mask = bundle.hand_mask ? *bundle.hand_mask : providers.handseg->segment(*bundle.image);
        extract_finger_keypoints(mask, cfg);
        return true;
    } catch (const Error& e) {
        if (e.is_provider_fault()) spdlog::warn("hand segmentation failed: {}", e.what());
        return false;
    }
}

RouteSet classify_ambiguity(const QueryBundle& bundle, const Providers& providers, const PipelineConfig& cfg) {
    return classify(bundle, providers, cfg).routes;
}

GroundingResult ground_pointing(const QueryBundle& bundle, const Providers& providers, const PipelineConfig& cfg,
                                std::vector<StageRecord>* trace) {
    require(bundle.image != nullptr, "pointing needs an image");
    bundle.validate();
    std::vector<StageRecord> local;
    auto& log = trace ? *trace : local;
    const RgbImage& image = *bundle.image;
    const std::string stage = "referential";
    const HandMask mask = timed(log, "hand_segmentation", stage, [&] {
        return bundle.hand_mask ? *bundle.hand_mask : providers.handseg->segment(image);
    });
    const DepthMap depth = timed(log, "depth_estimation", stage, [&] {
        return bundle.depth ? *bundle.depth : providers.depth->estimate(image);
    });
    const CameraIntrinsics k = intrinsics_for(bundle, cfg);
    GroundingResult g;
    g.pointing = timed(log, "pointing_fusion", stage, [&] { return estimate_pointing(mask, depth, k, cfg.pointing); });
    const CastConfig cast =
        cast_config_for(g.pointing, depth.scale == DepthScale::Relative ? cfg.cast_relative : cfg.cast);
    g.hit = timed(log, "ray_intersection", stage, [&] { return cast_ray(g.pointing.ray, depth, k, cast, &mask); });
    g.hand = mask_bbox(mask);
    if (g.hit.hit()) {
        timed(log, "adaptive_crop", stage, [&] {
            g.target = target_roi(g.hit, k, cfg.roi);
            g.context = context_crop(g.target, g.hand, k.size());
        });
    }
    return g;
}

PipelineRun::PipelineRun(QueryBundle bundle, Providers providers, PipelineConfig cfg)
    : bundle_(std::move(bundle)), providers_(std::move(providers)), cfg_(std::move(cfg)) {}

void PipelineRun::record(StageRecord r) { out_.trace.push_back(std::move(r)); }

std::string PipelineRun::scene_id() const {
    if (!bundle_.scene_id.empty()) return bundle_.scene_id;
    if (bundle_.image && !bundle_.image->source.empty()) return assets::locate_scene(bundle_.image->source).id;
    return "none";
}

PipelineOutcome PipelineRun::start(const AnswerChannel* answers) {
    require(out_.trace.empty(), "pipeline run already started");
    const auto start = Clock::now();
    auto done = [&]() -> PipelineOutcome {
        out_.total_ms += ms_since(start);
        return out_;
    };

    Classification c = classify(bundle_, providers_, cfg_);
    out_.routes = c.routes;
    out_.label = c.label;
    for (auto& r : c.records) record(std::move(r));
    axis_ = c.axis;

    std::string stage;
    try {
        if (out_.routes.contains(Route::Referential)) {
            stage = "referential";
            const RgbImage& image = *bundle_.image;
            const DepthMap depth = timed(out_.trace, "depth_estimation", stage, [&] {
                return bundle_.depth ? *bundle_.depth : providers_.depth->estimate(image);
            });
            const CameraIntrinsics k = intrinsics_for(bundle_, cfg_);
            const FingerAxis axis = *axis_;
            const PointingEstimate pe = timed(out_.trace, "pointing_fusion", stage, [&] {
                return estimate_pointing(*c.mask, depth, k, cfg_.pointing,
                                         [&](const HandMask&) { return std::optional<FingerAxis>(axis); });
            });
            const CastConfig cast =
                cast_config_for(pe, depth.scale == DepthScale::Relative ? cfg_.cast_relative : cfg_.cast);
            const IntersectionResult hit =
                timed(out_.trace, "ray_intersection", stage, [&] { return cast_ray(pe.ray, depth, k, cast, &*c.mask); });
            if (!hit.hit()) {
                out_.clarification_requests.push_back(guidance_request(
                    stage, make_guidance(GuidanceCode::AimAtTarget), "The pointing direction does not meet any surface"));
                return done();
            }
            GroundingResult g;
            timed(out_.trace, "adaptive_crop", stage, [&] {
                g.pointing = pe;
                g.hit = hit;
                g.target = target_roi(hit, k, cfg_.roi);
                g.hand = mask_bbox(*c.mask);
                g.context = context_crop(g.target, g.hand, k.size());
            });
            out_.grounding = g;
            answer_crop_ = g.context;
        }

        if (out_.routes.contains(Route::Visual)) {
            stage = "visual";
            const RgbImage& image = *bundle_.image;
            std::optional<BBox> box;
            if (out_.grounding) {
                box = out_.grounding->target;
            } else {
                const auto found = timed(out_.trace, "detection", stage, [&] { return detect(*providers_.detector, image, *out_.label); });
                if (!found.empty()) box = clamp_to_image(found.front().bbox, {image.width, image.height});
                answer_crop_ = box;
            }
            out_.assessment = timed(out_.trace, "feedback_generation", stage,
                                    [&] { return assess_target(image, box, cfg_.quality); });
            if (!out_.assessment->ok()) {
                for (const auto& m : out_.assessment->guidance) out_.clarification_requests.push_back(guidance_request(stage, m));
                return done();
            }
        }

        if (out_.routes.contains(Route::Semantic)) {
            stage = "semantic";
            session_ = std::make_shared<ClarificationSession>(request_of(bundle_), providers_.chat, cfg_.dialogue);
            auto q = timed(out_.trace, "dialogue", stage, [&] { return session_->start(); });
            if (answers && *answers) {
                while (q) {
                    auto reply = (*answers)(*q);
                    if (!reply) {
                        timed(out_.trace, "dialogue", stage, [&] { session_->abort(); });
                        break;
                    }
                    q = timed(out_.trace, "dialogue", stage, [&] { return session_->answer(std::move(*reply)); });
                }
            } else if (q) {
                out_.clarification_requests.push_back(question_request(*q));
                out_.awaiting_answer = true;
                return done();
            }
        }

        stage = "answer";
        after_dialogue();
    } catch (const Error& e) {
        out_.clarification_requests.push_back(failure(stage, e));
        out_.awaiting_answer = false;
    }
    return done();
}

PipelineOutcome PipelineRun::answer(std::string text) {
    require(awaiting_answer(), "pipeline is not waiting for an answer");
    const auto start = Clock::now();
    out_.clarification_requests.clear();
    try {
        const auto q = timed(out_.trace, "dialogue", "semantic", [&] { return session_->answer(std::move(text)); });
        if (q) {
            out_.clarification_requests.push_back(question_request(*q));
        } else {
            out_.awaiting_answer = false;
            after_dialogue();
        }
    } catch (const Error& e) {
        out_.awaiting_answer = false;
        out_.clarification_requests.push_back(failure(session_->finished() ? "answer" : "semantic", e));
    }
    out_.total_ms += ms_since(start);
    return out_;
}

PipelineOutcome PipelineRun::abort() {
    require(awaiting_answer(), "pipeline is not waiting for an answer");
    const auto start = Clock::now();
    out_.clarification_requests.clear();
    try {
        timed(out_.trace, "dialogue", "semantic", [&] { session_->abort(); });
        out_.dialogue = session_->outcome();
    } catch (const Error& e) {
        out_.clarification_requests.push_back(failure("semantic", e));
    }
    out_.awaiting_answer = false;
    out_.total_ms += ms_since(start);
    return out_;
}

PipelineOutcome PipelineRun::after_dialogue() {
    if (session_) {
        out_.dialogue = session_->outcome();
        if (out_.dialogue->terminated_by == Termination::UserAbort) return out_;
    }
    run_answer();
    return out_;
}

void PipelineRun::run_answer() {
    const std::string details = out_.dialogue ? details_of(*out_.dialogue) : std::string{};
    out_.answer = timed(out_.trace, "llm_processing", "answer", [&]() -> std::string {
        if (bundle_.image) {
            const RgbImage view = answer_crop_ ? crop(*bundle_.image, *answer_crop_) : *bundle_.image;
            return ground_crop_answer(*providers_.vlm, view, bundle_.text, scene_id(), details);
        }
        ChatRequest req;
        const UserRequest u0 = request_of(bundle_);
        req.script_key = "answer:" + u0.key();
        const std::string task = out_.dialogue ? out_.dialogue->summary.task : bundle_.text;
        req.messages = {{"system", render_prompt("answer_text.v1", {{"task", task}, {"resolved", details}})},
                        {"user", bundle_.text}};
        req.context = {{"op", "answer"}, {"id", u0.key()}, {"task", task}, {"details", details}};
        const std::string reply = text::trim(providers_.chat->complete(req).response);
        if (reply.empty()) fail(ErrorCode::ProviderError, "chat provider returned an empty answer");
        return reply;
    });
}

PipelineOutcome run_pipeline(const QueryBundle& bundle, const Providers& providers, const PipelineConfig& cfg,
                             const AnswerChannel* answers) {
    PipelineRun run(bundle, providers, cfg);
    return run.start(answers);
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const StageRecord& r) {
    j = json{{"stage", r.stage}, {"route", r.route}, {"ms", r.ms}, {"status", r.status}};
    if (!r.detail.empty()) j["detail"] = r.detail;
}

void to_json(json& j, const ClarificationRequest& r) {
    static constexpr std::array<const char*, 3> kinds{"guidance", "question", "failure"};
    j = json{{"kind", kinds[static_cast<std::size_t>(r.kind)]}, {"stage", r.stage}, {"code", r.code}, {"message", r.message}};
    if (r.guidance) j["guidance"] = *r.guidance;
    if (r.question) j["question"] = *r.question;
}

void to_json(json& j, const GroundingResult& g) {
    j = json{{"pointing", g.pointing}, {"intersection", g.hit}, {"target_box", g.target}, {"hand_box", g.hand},
             {"context_box", g.context}};
}

void to_json(json& j, const PipelineOutcome& o) {
    json routes = json::array();
    for (auto r : o.routes) routes.push_back(std::string(to_string(r)));
    j = json{{"routes", routes},
             {"clarification_requests", o.clarification_requests},
             {"answer", o.answer ? json(*o.answer) : json(nullptr)},
             {"label", o.label ? json(*o.label) : json(nullptr)},
             {"grounding", o.grounding ? json(*o.grounding) : json(nullptr)},
             {"assessment", o.assessment ? json(*o.assessment) : json(nullptr)},
             {"dialogue", o.dialogue ? json(*o.dialogue) : json(nullptr)},
             {"trace", o.trace},
             {"total_ms", o.total_ms},
             {"awaiting_answer", o.awaiting_answer}};
}

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"cast", c.cast},
             {"cast_relative", c.cast_relative},
             {"roi", c.roi},
             {"quality", c.quality},
             {"pointing", c.pointing},
             {"dialogue", {{"max_rounds", c.dialogue.max_rounds}, {"max_repairs", c.dialogue.max_repairs}}},
             {"hfov_deg", c.hfov_deg}};
}

void from_json(const json& j, PipelineConfig& c) {
    if (j.contains("cast")) from_json(j.at("cast"), c.cast);
    if (j.contains("cast_relative")) from_json(j.at("cast_relative"), c.cast_relative);
    if (j.contains("roi")) from_json(j.at("roi"), c.roi);
    if (j.contains("quality")) from_json(j.at("quality"), c.quality);
    if (j.contains("pointing")) from_json(j.at("pointing"), c.pointing);
    if (j.contains("dialogue")) {
        c.dialogue.max_rounds = j.at("dialogue").value("max_rounds", c.dialogue.max_rounds);
        c.dialogue.max_repairs = j.at("dialogue").value("max_repairs", c.dialogue.max_repairs);
    }
    c.hfov_deg = j.value("hfov_deg", c.hfov_deg);
    c.cast.validate();
    c.cast_relative.validate();
    c.dialogue.validate();
}

}  // namespace clarifier

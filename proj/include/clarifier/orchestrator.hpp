#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clarifier/dialogue.hpp"
#include "clarifier/gateway.hpp"
#include "clarifier/hand_pointing.hpp"
#include "clarifier/vision_quality.hpp"

namespace clarifier {

struct QueryBundle {
    std::string text;
    std::shared_ptr<const RgbImage> image;
    std::optional<DepthMap> depth;          // estimated through the provider when absent
    std::optional<HandMask> hand_mask;      // segmented through the provider when absent
    std::optional<CameraIntrinsics> intrinsics;
    std::string session;
    std::string script_id;  // keys scripted dialogue transcripts
    std::string scene_id;   // keys scripted VLM answers; derived from the image path when empty

    void validate() const;
};

enum class Route { Semantic, Visual, Referential };
using RouteSet = std::set<Route>;

std::string_view to_string(Route r);

struct StageRecord {
    std::string stage;  // e.g. ray_intersection
    std::string route;  // classify | referential | visual | semantic | answer
    double ms = 0.0;
    std::string status = "ok";
    std::string detail;
};

struct ClarificationRequest {
    enum class Kind { Guidance, Question, Failure };
    Kind kind = Kind::Failure;
    std::string stage;
    std::optional<GuidanceMessage> guidance;
    std::optional<PendingQuestion> question;
    std::string code;  // guidance code, "question", or the error code
    std::string message;
};

struct GroundingResult {
    PointingEstimate pointing;
    IntersectionResult hit;
    BBox target;
    BBox hand;
    BBox context;
};

struct PipelineOutcome {
    RouteSet routes;
    std::vector<ClarificationRequest> clarification_requests;
    std::optional<std::string> answer;
    std::optional<std::string> label;  // entity the visual route looked for
    std::optional<GroundingResult> grounding;
    std::optional<TargetAssessment> assessment;
    std::optional<ClarificationOutcome> dialogue;
    std::vector<StageRecord> trace;
    double total_ms = 0.0;
    bool awaiting_answer = false;
};

struct PipelineConfig {
    CastConfig cast;
    CastConfig cast_relative = CastConfig::relative_default();
    RoiConfig roi;
    QualityConfig quality;
    PointingConfig pointing;
    DialogueConfig dialogue;
    double hfov_deg = 70.0;
};

/// The deictic words that make a query eligible for the referential route.
bool has_deictic(std::string_view text);

/// True iff the hand segmenter yields a mask that passes keypoint
/// extraction (the elongation gate). Provider failures count as false.
bool pointing_intent_detect(const QueryBundle& bundle, const Providers& providers, const PointingConfig& cfg = {});

RouteSet classify_ambiguity(const QueryBundle& bundle, const Providers& providers, const PipelineConfig& cfg = {});

/// Bundle intrinsics, else the scene's intrinsics.json, else a pinhole from
/// the scene's (or the configured) horizontal field of view.
CameraIntrinsics resolve_intrinsics(const QueryBundle& bundle, const PipelineConfig& cfg = {});

/// Referential grounding on its own: segment, fuse, cast, crop. Check
/// hit.status; the target and context boxes are only set on a hit.
GroundingResult ground_pointing(const QueryBundle& bundle, const Providers& providers, const PipelineConfig& cfg = {},
                                std::vector<StageRecord>* trace = nullptr);

/// One pass through referential -> visual -> semantic -> answer. When the
/// semantic stage needs the user and no answer channel was given, the run
/// pauses with the question as a clarification request; answer() resumes it.
class PipelineRun {
public:
    PipelineRun(QueryBundle bundle, Providers providers, PipelineConfig cfg = {});

    PipelineOutcome start(const AnswerChannel* answers = nullptr);
    PipelineOutcome answer(std::string text);
    /// Ends a paused dialogue; the outcome carries no answer.
    PipelineOutcome abort();

    bool awaiting_answer() const { return session_ && !session_->finished(); }
    const PipelineOutcome& outcome() const { return out_; }

private:
    PipelineOutcome after_dialogue();
    void run_answer();
    void record(StageRecord r);
    std::string scene_id() const;

    QueryBundle bundle_;
    Providers providers_;
    PipelineConfig cfg_;
    PipelineOutcome out_;
    std::shared_ptr<ClarificationSession> session_;
    std::optional<BBox> answer_crop_;
    std::optional<FingerAxis> axis_;
};

PipelineOutcome run_pipeline(const QueryBundle& bundle, const Providers& providers, const PipelineConfig& cfg = {},
                             const AnswerChannel* answers = nullptr);

void to_json(json& j, const StageRecord& r);
void to_json(json& j, const ClarificationRequest& r);
void to_json(json& j, const GroundingResult& g);
void to_json(json& j, const PipelineOutcome& o);
void to_json(json& j, const PipelineConfig& c);
/// Merges the fields present in `j` into `c`.
void from_json(const json& j, PipelineConfig& c);

}  // namespace clarifier

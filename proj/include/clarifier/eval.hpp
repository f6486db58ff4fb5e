#pragma once

// Offline evaluation: simulated users, the three-stage dialogue scoring
// pipeline (simulate, disentangle, match) and the benchmark metrics.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clarifier/dialogue.hpp"
#include "clarifier/gateway.hpp"
#include "clarifier/orchestrator.hpp"
#include "clarifier/vision_quality.hpp"

namespace clarifier::eval {

enum class Modality { Text, Visual, Referential };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

/// One piece of information the request leaves out, with what a simulated
/// user would say when asked about it.
struct AttributeTruth {
    std::string attribute;
    std::string description;  // matched against disentangled units; defaults to attribute
    std::string value;        // the simulated user's answer
    std::vector<std::string> keywords;  // words that make a question target this attribute
    Priority priority = Priority::Important;
};

struct BenchmarkSample {
    std::string id;
    Modality modality = Modality::Text;
    std::string query;
    std::optional<std::filesystem::path> image;
    std::optional<std::filesystem::path> depth;
    std::optional<std::filesystem::path> mask;
    std::optional<bool> gt_vague;
    std::vector<AttributeTruth> gt_missing_attrs;
    std::optional<DirectionSet> gt_guidance;
    std::optional<std::string> gt_label;
    std::optional<BBox> gt_bbox;
    std::optional<std::string> gt_answer;
    std::optional<bool> gt_pointing;

    void validate() const;
};

/// Accepts this project's field names and common external benchmark layouts
/// (rgb, target_object, needs_vision_clarification, missing_details, ...).
/// Relative asset paths resolve against `base_dir`.
BenchmarkSample sample_from_json(const json& j, const std::filesystem::path& base_dir);
json sample_to_json(const BenchmarkSample& s);

/// JSON Lines, or a single JSON array.
std::vector<BenchmarkSample> load_manifest(const std::filesystem::path& path);

/// Canonical concept for a question fragment ("recipient", "budget", ...).
std::optional<std::string> canonical_concept(std::string_view fragment);

/// Whether `question` asks about `attr`.
bool question_targets(std::string_view question, const AttributeTruth& attr);

/// Simulated user. Cooperative answers exactly the attributes a question
/// targets; evasive never gives anything away.
class Persona {
public:
    enum class Kind { Cooperative, Evasive };
    static constexpr std::string_view kUnsure = "I'm not sure";

    explicit Persona(Kind kind = Kind::Cooperative) : kind_(kind) {}
    std::string answer(std::string_view question, const std::vector<AttributeTruth>& truth) const;
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

enum class SystemKind { Clarifier, Monolithic };

std::string_view to_string(SystemKind k);

struct DialogueLog {
    DialogueHistory history;
    int rounds = 0;
    bool capped = false;
    std::optional<Termination> terminated_by;
};

struct EvalConfig {
    double theta_match = 0.7;
    double theta_ans = 0.7;
    double iou_threshold = 0.5;
    /// Use the chat provider to split questions instead of the rule splitter.
    bool remote_disentangle = false;
    PipelineConfig pipeline;
    int threads = 0;  // 0 = OpenMP default
};

DialogueLog simulate_interaction(const BenchmarkSample& sample, SystemKind system, const Persona& persona,
                                 const ChatProvider& chat, const EvalConfig& cfg = {});

/// Atomic information needs ("budget?", "recipient?") asked across the log.
/// With `chat` the provider does the splitting; otherwise a deterministic
/// rule splitter on conjunctions and enumerations.
std::vector<std::string> disentangle_questions(const DialogueHistory& log, const ChatProvider* chat = nullptr);

struct RecoverCount {
    int recovered = 0;
    int total = 0;
    double rate() const { return total > 0 ? static_cast<double>(recovered) / total : 0.0; }
};

RecoverCount match_recovered(const std::vector<std::string>& units, const std::vector<AttributeTruth>& gt,
                             const SemanticJudge& judge, double theta = 0.7);

struct GuidanceScore {
    int strict = 0;
    int loose = 0;
};

GuidanceScore score_guidance(const std::vector<DirectionSet>& pred, const DirectionSet& gold);

struct Ratio {
    long long numerator = 0;
    long long denominator = 0;
    std::optional<double> value() const {
        if (denominator == 0) return std::nullopt;
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }
};

/// Per-sample contributions; the report is a fold over these.
struct SampleRecord {
    std::string id;
    Modality modality = Modality::Text;
    std::string error;

    Ratio vagueness;
    std::optional<bool> predicted_vague;
    Ratio rounds;  // numerator = rounds, denominator = 1 for gt-vague samples
    Ratio details;
    std::vector<std::string> units;
    bool capped = false;

    Ratio target_id;
    std::optional<std::string> predicted_label;
    Ratio strict;
    Ratio loose;
    DirectionSet predicted_directions;

    Ratio pointing;
    std::optional<bool> predicted_pointing;
    Ratio semantic_answer;
    double answer_score = 0.0;
    std::optional<std::string> answer;
};

struct MetricReport {
    Ratio vagueness_accuracy;
    Ratio avg_rounds;
    Ratio details_recover_rate;
    Ratio target_id_accuracy;
    Ratio strict_recover_rate;
    Ratio loose_recover_rate;
    Ratio pointing_success_accuracy;
    Ratio semantic_answer_recover_rate;
    double semantic_score_sum = 0.0;  // mean raw judge score = sum / semantic denominator
    std::vector<SampleRecord> records;  // sorted by id

    std::optional<double> mean_semantic_score() const;
    json to_json() const;
    std::string table() const;
};

/// Order-independent fold (records are sorted by id first).
MetricReport aggregate(std::vector<SampleRecord> records);

SampleRecord evaluate_sample(const BenchmarkSample& sample, SystemKind system, const Providers& providers,
                             const Persona& persona, const EvalConfig& cfg);

MetricReport evaluate(const std::vector<BenchmarkSample>& benchmark, SystemKind system, const Providers& providers,
                      const EvalConfig& cfg = {}, const Persona& persona = Persona{});

/// Chat backend that simulates an analysis model for a fixed world of
/// missing attributes per request id: it lists an attribute as known once
/// the history holds a turn on it whose answer contains the true value.
/// Requests it does not model go to `fallback` (if any).
class SimulatedWorldChat final : public ChatProvider {
public:
    explicit SimulatedWorldChat(std::map<std::string, std::vector<AttributeTruth>> worlds,
                                std::shared_ptr<const ChatProvider> fallback = nullptr)
        : worlds_(std::move(worlds)), fallback_(std::move(fallback)) {}
    ChatExchange complete(const ChatRequest& request) const override;

private:
    std::map<std::string, std::vector<AttributeTruth>> worlds_;
    std::shared_ptr<const ChatProvider> fallback_;
};

/// Question a well-behaved system asks about a canonical attribute.
std::string canonical_question(std::string_view attribute);

}  // namespace clarifier::eval

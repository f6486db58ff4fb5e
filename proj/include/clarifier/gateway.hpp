#pragma once

// Provider abstraction over every neural dependency. Each kind has a remote
// client speaking a JSON-over-HTTP protocol and a deterministic offline
// backend (scripted transcript or on-disk assets) used by tests and the
// evaluation harness.

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clarifier/assets.hpp"
#include "clarifier/geometry.hpp"
#include "clarifier/raster.hpp"

namespace clarifier {

using json = nlohmann::json;

enum class ProviderKind { Chat, Vlm, Detector, Depth, HandSeg, Judge };
enum class ProviderMode { Remote, Scripted, File };

std::string_view to_string(ProviderKind kind);
std::string_view to_string(ProviderMode mode);
ProviderMode provider_mode_from_string(std::string_view s);

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Chat;
    ProviderMode mode = ProviderMode::Scripted;
    std::string endpoint;    // remote: base URL, e.g. http://localhost:8000/v1
    std::string model;       // remote chat/vlm/judge model name
    std::string asset_path;  // scripted: transcript file
    std::string auth_env;    // environment variable holding the bearer token
    int timeout_ms = 30000;
    int retries = 2;
    int backoff_ms = 250;
    double temperature = 0.0;

    void validate() const;
    /// Fields absent from `j` keep their defaults; an empty endpoint/auth_env
    /// falls back to CLARIFIER_<KIND>_ENDPOINT / CLARIFIER_<KIND>_API_KEY.
    static ProviderConfig from_json(const json& j, ProviderKind kind);
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    /// Key the scripted backend replays; ignored by remote backends.
    std::string script_key;
    /// 0 for the first try, incremented on each repair retry.
    int attempt = 0;
    /// Optional image attached to the last user message.
    std::shared_ptr<const RgbImage> image;
    /// Structured form of what the prompt text carries. Remote backends
    /// ignore it; simulated backends read it instead of parsing prose.
    json context;
};

struct ChatUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatExchange {
    std::vector<ChatMessage> messages;
    std::string response;
    ChatUsage usage;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatExchange complete(const ChatRequest& request) const = 0;
};

/// Replays a keyed transcript. A key maps to one response or to a list
/// indexed by attempt (the last entry repeats). Unknown keys throw
/// UnknownScriptKey. Stateless and therefore reentrant.
class ScriptedChat final : public ChatProvider {
public:
    ScriptedChat() = default;
    explicit ScriptedChat(json transcript);
    static ScriptedChat from_file(const std::filesystem::path& path);

    void set(const std::string& key, json response);
    bool has(const std::string& key) const;
    ChatExchange complete(const ChatRequest& request) const override;

private:
    std::map<std::string, json> entries_;
};

/// Chat-completions wire client: one POST of the message array per call,
/// bounded retries with exponential backoff on 429/5xx/transport errors.
class RemoteChat final : public ChatProvider {
public:
    explicit RemoteChat(ProviderConfig cfg);
    ChatExchange complete(const ChatRequest& request) const override;

private:
    ProviderConfig cfg_;
};

class Detector {
public:
    virtual ~Detector() = default;
    /// Boxes for `label`, sorted by score descending. Empty = not found.
    virtual std::vector<DetectionResult> detect(const RgbImage& image, std::string_view label) const = 0;
};

class DepthEstimator {
public:
    virtual ~DepthEstimator() = default;
    virtual DepthMap estimate(const RgbImage& image) const = 0;
};

class HandSegmenter {
public:
    virtual ~HandSegmenter() = default;
    /// An all-zero mask means no hand is visible.
    virtual HandMask segment(const RgbImage& image) const = 0;
};

class SemanticJudge {
public:
    virtual ~SemanticJudge() = default;
    /// Similarity in [0, 1].
    virtual double score(std::string_view answer, std::string_view gold) const = 0;
};

/// Reads `detections.json` next to the image (or as named by scene.json).
class FileDetector final : public Detector {
public:
    std::vector<DetectionResult> detect(const RgbImage& image, std::string_view label) const override;
};

class FileDepthEstimator final : public DepthEstimator {
public:
    DepthMap estimate(const RgbImage& image) const override;
};

class FileHandSegmenter final : public HandSegmenter {
public:
    HandMask segment(const RgbImage& image) const override;
};

class RemoteDetector final : public Detector {
public:
    explicit RemoteDetector(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
    std::vector<DetectionResult> detect(const RgbImage& image, std::string_view label) const override;

private:
    ProviderConfig cfg_;
};

class RemoteDepthEstimator final : public DepthEstimator {
public:
    explicit RemoteDepthEstimator(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
    DepthMap estimate(const RgbImage& image) const override;

private:
    ProviderConfig cfg_;
};

class RemoteHandSegmenter final : public HandSegmenter {
public:
    explicit RemoteHandSegmenter(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
    HandMask segment(const RgbImage& image) const override;

private:
    ProviderConfig cfg_;
};

/// Offline judge: normalised token-overlap F1. A deterministic test oracle,
/// not a stand-in claim for an LLM judge.
class TokenF1Judge final : public SemanticJudge {
public:
    double score(std::string_view answer, std::string_view gold) const override;
};

/// Prompts a chat model for a similarity score; out-of-range scores are
/// clamped with a warning.
class ChatJudge final : public SemanticJudge {
public:
    explicit ChatJudge(std::shared_ptr<const ChatProvider> chat) : chat_(std::move(chat)) {}
    double score(std::string_view answer, std::string_view gold) const override;

private:
    std::shared_ptr<const ChatProvider> chat_;
};

struct Providers {
    std::shared_ptr<const ChatProvider> chat;
    std::shared_ptr<const ChatProvider> vlm;
    std::shared_ptr<const Detector> detector;
    std::shared_ptr<const DepthEstimator> depth;
    std::shared_ptr<const HandSegmenter> handseg;
    std::shared_ptr<const SemanticJudge> judge;
};

struct GatewayConfig {
    ProviderConfig chat{.kind = ProviderKind::Chat};
    ProviderConfig vlm{.kind = ProviderKind::Vlm};
    ProviderConfig detector{.kind = ProviderKind::Detector, .mode = ProviderMode::File};
    ProviderConfig depth{.kind = ProviderKind::Depth, .mode = ProviderMode::File};
    ProviderConfig handseg{.kind = ProviderKind::HandSeg, .mode = ProviderMode::File};
    ProviderConfig judge{.kind = ProviderKind::Judge};

    static GatewayConfig from_json(const json& j);
    /// Forces every provider into `mode` (scripted also selects file assets
    /// for the raster providers, which have no transcript form).
    void override_mode(ProviderMode mode);
};

Providers make_providers(const GatewayConfig& cfg);

// Operations layered on the providers.

std::string chat_complete(const ChatProvider& chat, const ChatRequest& request);

/// Single class label for the object a query is about. Throws NoEntity when
/// the query has no visual referent.
std::string extract_entity(const ChatProvider& chat, std::string_view query);

std::vector<DetectionResult> detect(const Detector& detector, const RgbImage& image, std::string_view label);

/// VLM answer for a (crop, query) pair. Scripted key: vlm:<scene>:<slug(query)>.
/// `details` (clarified attributes) is appended to the prompt, not the key.
std::string ground_crop_answer(const ChatProvider& vlm, const RgbImage& crop, std::string_view query,
                               std::string_view scene_id, std::string_view details = {});

double judge_semantic(const SemanticJudge& judge, std::string_view answer, std::string_view gold);

/// Loads a versioned prompt template from the prompt directory
/// (CLARIFIER_PROMPT_DIR or the built-in copy) and substitutes {name} fields.
std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& fields);

/// Extracts the first JSON object from model text (tolerates code fences and
/// surrounding prose). std::nullopt when nothing parses.
std::optional<json> parse_json_reply(std::string_view text);

}  // namespace clarifier

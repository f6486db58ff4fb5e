#include "clarifier/gateway.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

#include "clarifier/serialize.hpp"
#include "clarifier/text.hpp"

#ifndef CLARIFIER_PROMPT_DIR
#define CLARIFIER_PROMPT_DIR "assets/prompts"
#endif

namespace clarifier {

std::string_view to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::Chat: return "chat";
        case ProviderKind::Vlm: return "vlm";
        case ProviderKind::Detector: return "detector";
        case ProviderKind::Depth: return "depth";
        case ProviderKind::HandSeg: return "handseg";
        case ProviderKind::Judge: return "judge";
    }
    return "chat";
}

std::string_view to_string(ProviderMode mode) {
    switch (mode) {
        case ProviderMode::Remote: return "remote";
        case ProviderMode::Scripted: return "scripted";
        case ProviderMode::File: return "file";
    }
    return "scripted";
}

ProviderMode provider_mode_from_string(std::string_view s) {
    if (s == "remote") return ProviderMode::Remote;
    if (s == "scripted") return ProviderMode::Scripted;
    if (s == "file") return ProviderMode::File;
    fail(ErrorCode::InvalidArgument, "unknown provider mode: " + std::string(s));
}

void ProviderConfig::validate() const {
    require(timeout_ms > 0, "provider timeout must be positive");
    require(retries >= 0 && backoff_ms >= 0, "provider retries and backoff must be non-negative");
    if (mode == ProviderMode::Remote) require(!endpoint.empty(), std::string(to_string(kind)) + " provider needs an endpoint");
}

ProviderConfig ProviderConfig::from_json(const json& j, ProviderKind kind) {
    ProviderConfig c;
    c.kind = kind;
    if (kind == ProviderKind::Detector || kind == ProviderKind::Depth || kind == ProviderKind::HandSeg) {
        c.mode = ProviderMode::File;
    }
    if (j.contains("mode")) c.mode = provider_mode_from_string(j.at("mode").get<std::string>());
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.asset_path = j.value("asset_path", c.asset_path);
    c.auth_env = j.value("auth_env", c.auth_env);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.retries = j.value("retries", c.retries);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    c.temperature = j.value("temperature", c.temperature);

    std::string upper = text::lower(to_string(kind));
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (c.endpoint.empty()) {
        if (const char* env = std::getenv(("CLARIFIER_" + upper + "_ENDPOINT").c_str())) c.endpoint = env;
    }
    if (c.auth_env.empty()) c.auth_env = "CLARIFIER_" + upper + "_API_KEY";
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// HTTP plumbing shared by the remote clients

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string base_path;
};

Endpoint split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) fail(ErrorCode::InvalidArgument, "malformed provider endpoint: " + url);
    std::string path = m[2].matched ? m[2].str() : "";
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {m[1].str(), path};
}

json post_json(const ProviderConfig& cfg, const std::string& path, const json& body) {
    cfg.validate();
    const Endpoint ep = split_endpoint(cfg.endpoint);
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (const char* token = cfg.auth_env.empty() ? nullptr : std::getenv(cfg.auth_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const std::string payload = body.dump();
    const std::string target = ep.base_path + path;

    ErrorCode last_code = ErrorCode::ProviderError;
    std::string last_message;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms) * (1 << std::min(attempt - 1, 10)));
        }
        auto res = client.Post(target, headers, payload, "application/json");
        if (!res) {
            const auto err = res.error();
            last_code = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) ? ErrorCode::Timeout
                                                                                                  : ErrorCode::ProviderError;
            last_message = "transport error: " + httplib::to_string(err);
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                fail(ErrorCode::ProviderError, std::string("provider returned malformed JSON: ") + e.what());
            }
        }
        last_message = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        if (res->status == 401 || res->status == 403) fail(ErrorCode::AuthError, last_message);
        if (res->status == 429) {
            last_code = ErrorCode::RateLimited;
            continue;
        }
        if (res->status >= 500) {
            last_code = ErrorCode::ProviderError;
            continue;
        }
        fail(ErrorCode::ProviderError, last_message);
    }
    fail(last_code, std::string(to_string(cfg.kind)) + " provider failed after retries: " + last_message);
}

int rough_tokens(std::string_view s) { return static_cast<int>(text::words(s).size()); }

std::string require_source(const RgbImage& image) {
    if (image.source.empty()) fail(ErrorCode::MissingAsset, "image has no source path; file providers need one");
    return image.source;
}

}  // namespace

// ---------------------------------------------------------------------------
// Chat

ScriptedChat::ScriptedChat(json transcript) {
    if (transcript.contains("entries")) transcript = transcript.at("entries");
    require(transcript.is_object(), "scripted transcript must be a JSON object of key -> response");
    for (auto& [key, value] : transcript.items()) entries_[key] = value;
}

ScriptedChat ScriptedChat::from_file(const std::filesystem::path& path) {
    try {
        return ScriptedChat(json::parse(assets::read_text(path)));
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, "malformed transcript " + path.string() + ": " + e.what());
    }
}

void ScriptedChat::set(const std::string& key, json response) { entries_[key] = std::move(response); }

bool ScriptedChat::has(const std::string& key) const { return entries_.contains(key); }

ChatExchange ScriptedChat::complete(const ChatRequest& request) const {
    const auto it = entries_.find(request.script_key);
    if (it == entries_.end()) fail(ErrorCode::UnknownScriptKey, "no scripted response for key '" + request.script_key + "'");
    json entry = it->second;
    if (entry.is_array()) {
        require(!entry.empty(), "scripted response list for '" + request.script_key + "' is empty");
        entry = entry.at(std::min<std::size_t>(static_cast<std::size_t>(std::max(request.attempt, 0)), entry.size() - 1));
    }
    ChatExchange out;
    out.messages = request.messages;
    out.response = entry.is_string() ? entry.get<std::string>() : entry.dump();
    for (const auto& m : request.messages) out.usage.prompt_tokens += rough_tokens(m.content);
    out.usage.completion_tokens = rough_tokens(out.response);
    return out;
}

RemoteChat::RemoteChat(ProviderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ChatExchange RemoteChat::complete(const ChatRequest& request) const {
    json messages = json::array();
    for (std::size_t i = 0; i < request.messages.size(); ++i) {
        const auto& m = request.messages[i];
        const bool attach = request.image && i + 1 == request.messages.size() && m.role == "user";
        if (attach) {
            const std::string url = "data:image/png;base64," + assets::base64_encode(assets::encode_png(*request.image));
            messages.push_back({{"role", m.role},
                                {"content", json::array({json{{"type", "text"}, {"text", m.content}},
                                                         json{{"type", "image_url"}, {"image_url", {{"url", url}}}}})}});
        } else {
            messages.push_back({{"role", m.role}, {"content", m.content}});
        }
    }
    json body{{"messages", messages}, {"temperature", cfg_.temperature}};
    if (!cfg_.model.empty()) body["model"] = cfg_.model;

    const json reply = post_json(cfg_, "/chat/completions", body);
    ChatExchange out;
    out.messages = request.messages;
    try {
        out.response = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        if (reply.contains("usage")) {
            out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
            out.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::ProviderError, std::string("unexpected chat-completions reply: ") + e.what());
    }
    if (out.response.empty()) fail(ErrorCode::ProviderError, "chat provider returned an empty response");
    return out;
}

// ---------------------------------------------------------------------------
// Raster providers

namespace {

void sort_by_score(std::vector<DetectionResult>& d) {
    std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
}

bool same_label(std::string_view a, std::string_view b) { return text::lower(text::trim(a)) == text::lower(text::trim(b)); }

}  // namespace

std::vector<DetectionResult> FileDetector::detect(const RgbImage& image, std::string_view label) const {
    const auto scene = assets::locate_scene(require_source(image));
    if (!scene.detections) return {};
    std::vector<DetectionResult> out;
    for (auto& d : assets::load_detections(*scene.detections)) {
        if (same_label(d.label, label)) out.push_back(std::move(d));
    }
    sort_by_score(out);
    return out;
}

DepthMap FileDepthEstimator::estimate(const RgbImage& image) const {
    const auto scene = assets::locate_scene(require_source(image));
    DepthMap depth = assets::load_depth(scene.depth, scene.depth_sidecar, scene.depth_kind);
    if (depth.width != image.width || depth.height != image.height) {
        fail(ErrorCode::MalformedAsset, "depth asset size does not match the image");
    }
    return depth;
}

HandMask FileHandSegmenter::segment(const RgbImage& image) const {
    const auto scene = assets::locate_scene(require_source(image));
    if (!scene.mask) return HandMask(image.width, image.height);
    HandMask mask = assets::load_mask(*scene.mask);
    if (mask.width != image.width || mask.height != image.height) {
        fail(ErrorCode::MalformedAsset, "mask asset size does not match the image");
    }
    return mask;
}

std::vector<DetectionResult> RemoteDetector::detect(const RgbImage& image, std::string_view label) const {
    const json reply = post_json(cfg_, "/detect",
                                 {{"label", label}, {"image", assets::base64_encode(assets::encode_png(image))}});
    std::vector<DetectionResult> out;
    try {
        for (const auto& item : reply.at("detections")) out.push_back(item.get<DetectionResult>());
    } catch (const json::exception& e) {
        fail(ErrorCode::ProviderError, std::string("unexpected detector reply: ") + e.what());
    }
    std::erase_if(out, [&](const auto& d) { return !same_label(d.label, label); });
    for (auto& d : out) d.score = std::clamp(d.score, 0.0, 1.0);
    sort_by_score(out);
    return out;
}

DepthMap RemoteDepthEstimator::estimate(const RgbImage& image) const {
    const json reply = post_json(cfg_, "/depth", {{"image", assets::base64_encode(assets::encode_png(image))}});
    DepthMap out;
    try {
        out = DepthMap(reply.at("width").get<int>(), reply.at("height").get<int>());
        const auto& values = reply.at("values");
        if (values.size() != out.size()) fail(ErrorCode::ProviderError, "depth reply has the wrong number of values");
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = values[i].get<double>();
        out.scale = reply.value("kind", std::string("relative")) == "metric" ? DepthScale::Metric : DepthScale::Relative;
    } catch (const json::exception& e) {
        fail(ErrorCode::ProviderError, std::string("unexpected depth reply: ") + e.what());
    }
    if (out.width != image.width || out.height != image.height) fail(ErrorCode::ProviderError, "depth reply size does not match the image");
    out.validate();
    return out;
}

HandMask RemoteHandSegmenter::segment(const RgbImage& image) const {
    const json reply = post_json(cfg_, "/segment", {{"image", assets::base64_encode(assets::encode_png(image))}});
    HandMask mask;
    try {
        if (reply.at("mask_png").is_null()) return HandMask(image.width, image.height);
        mask = assets::decode_mask(assets::base64_decode(reply.at("mask_png").get<std::string>()));
    } catch (const json::exception& e) {
        fail(ErrorCode::ProviderError, std::string("unexpected segmentation reply: ") + e.what());
    }
    if (mask.width != image.width || mask.height != image.height) fail(ErrorCode::ProviderError, "mask reply size does not match the image");
    return mask;
}

// ---------------------------------------------------------------------------
// Judges

double TokenF1Judge::score(std::string_view answer, std::string_view gold) const { return text::token_f1(answer, gold); }

double ChatJudge::score(std::string_view answer, std::string_view gold) const {
    ChatRequest req;
    req.script_key = "judge:" + text::slug(answer) + "|" + text::slug(gold);
    req.messages = {{"system", render_prompt("judge_semantic.v1", {})},
                    {"user", "Answer: " + std::string(answer) + "\nReference: " + std::string(gold)}};
    const std::string reply = chat_->complete(req).response;
    double s = 0.0;
    if (auto j = parse_json_reply(reply); j && j->contains("score") && (*j)["score"].is_number()) {
        s = (*j)["score"].get<double>();
    } else {
        try {
            s = std::stod(text::trim(reply));
        } catch (const std::exception&) {
            fail(ErrorCode::ProviderError, "judge reply carries no score");
        }
    }
    if (s < 0.0 || s > 1.0) {
        spdlog::warn("judge score {} outside [0, 1]; clamped", s);
        s = std::clamp(s, 0.0, 1.0);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Factory

GatewayConfig GatewayConfig::from_json(const json& j) {
    const json& p = j.contains("providers") ? j.at("providers") : j;
    GatewayConfig g;
    auto read = [&](const char* name, ProviderKind kind, ProviderConfig& out) {
        out = ProviderConfig::from_json(p.contains(name) ? p.at(name) : json::object(), kind);
    };
    read("chat", ProviderKind::Chat, g.chat);
    read("vlm", ProviderKind::Vlm, g.vlm);
    read("detector", ProviderKind::Detector, g.detector);
    read("depth", ProviderKind::Depth, g.depth);
    read("handseg", ProviderKind::HandSeg, g.handseg);
    read("judge", ProviderKind::Judge, g.judge);
    if (g.vlm.asset_path.empty()) g.vlm.asset_path = g.chat.asset_path;
    return g;
}

void GatewayConfig::override_mode(ProviderMode mode) {
    const ProviderMode raster = mode == ProviderMode::Remote ? ProviderMode::Remote : ProviderMode::File;
    const ProviderMode text_mode = mode == ProviderMode::File ? ProviderMode::Scripted : mode;
    chat.mode = vlm.mode = judge.mode = text_mode;
    detector.mode = depth.mode = handseg.mode = raster;
}

Providers make_providers(const GatewayConfig& cfg) {
    auto make_chat = [](const ProviderConfig& c) -> std::shared_ptr<const ChatProvider> {
        if (c.mode == ProviderMode::Remote) return std::make_shared<RemoteChat>(c);
        if (c.asset_path.empty()) return std::make_shared<ScriptedChat>();
        return std::make_shared<ScriptedChat>(ScriptedChat::from_file(c.asset_path));
    };
    Providers p;
    p.chat = make_chat(cfg.chat);
    p.vlm = cfg.vlm.asset_path == cfg.chat.asset_path && cfg.vlm.mode == cfg.chat.mode && cfg.vlm.mode != ProviderMode::Remote
                ? p.chat
                : make_chat(cfg.vlm);
    if (cfg.detector.mode == ProviderMode::Remote) {
        p.detector = std::make_shared<RemoteDetector>(cfg.detector);
    } else {
        p.detector = std::make_shared<FileDetector>();
    }
    if (cfg.depth.mode == ProviderMode::Remote) {
        p.depth = std::make_shared<RemoteDepthEstimator>(cfg.depth);
    } else {
        p.depth = std::make_shared<FileDepthEstimator>();
    }
    if (cfg.handseg.mode == ProviderMode::Remote) {
        p.handseg = std::make_shared<RemoteHandSegmenter>(cfg.handseg);
    } else {
        p.handseg = std::make_shared<FileHandSegmenter>();
    }
    if (cfg.judge.mode == ProviderMode::Remote) {
        p.judge = std::make_shared<ChatJudge>(std::make_shared<RemoteChat>(cfg.judge));
    } else {
        p.judge = std::make_shared<TokenF1Judge>();
    }
    return p;
}

// ---------------------------------------------------------------------------
// Operations

std::string chat_complete(const ChatProvider& chat, const ChatRequest& request) { return chat.complete(request).response; }

std::string extract_entity(const ChatProvider& chat, std::string_view query) {
    require(!text::trim(query).empty(), "entity extraction needs a non-empty query");
    ChatRequest req;
    req.script_key = "entity:" + text::slug(query);
    req.messages = {{"system", render_prompt("extract_entity.v1", {})}, {"user", std::string(query)}};
    req.context = {{"op", "entity"}, {"query", query}};
    const std::string reply = chat.complete(req).response;

    std::string label;
    if (auto j = parse_json_reply(reply)) {
        if (j->contains("label") && (*j)["label"].is_string()) label = (*j)["label"].get<std::string>();
    } else {
        label = reply;
    }
    label = text::trim(label);
    const std::string low = text::lower(label);
    if (label.empty() || low == "none" || low == "null") fail(ErrorCode::NoEntity, "query names no visual target");
    return label;
}

std::vector<DetectionResult> detect(const Detector& detector, const RgbImage& image, std::string_view label) {
    require(!text::trim(label).empty(), "detection needs a non-empty label");
    auto out = detector.detect(image, label);
    sort_by_score(out);
    return out;
}

std::string ground_crop_answer(const ChatProvider& vlm, const RgbImage& crop, std::string_view query,
                               std::string_view scene_id, std::string_view details) {
    require(!crop.empty(), "grounded answer needs a non-empty crop");
    ChatRequest req;
    req.script_key = "vlm:" + std::string(scene_id) + ":" + text::slug(query);
    std::string user(query);
    if (!details.empty()) user += "\nDetails: " + std::string(details);
    req.messages = {{"system", render_prompt("ground_answer.v1", {})}, {"user", user}};
    req.context = {{"op", "vlm"}, {"scene", scene_id}, {"query", query}, {"details", details}};
    req.image = std::make_shared<const RgbImage>(crop);
    return text::trim(vlm.complete(req).response);
}

double judge_semantic(const SemanticJudge& judge, std::string_view answer, std::string_view gold) {
    require(!text::trim(answer).empty() && !text::trim(gold).empty(), "semantic judging needs two non-empty texts");
    return std::clamp(judge.score(answer, gold), 0.0, 1.0);
}

std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& fields) {
    std::filesystem::path dir = CLARIFIER_PROMPT_DIR;
    if (const char* env = std::getenv("CLARIFIER_PROMPT_DIR")) dir = env;
    std::string body = assets::read_text(dir / (std::string(name) + ".txt"));
    // First line is the version banner.
    if (auto nl = body.find('\n'); body.rfind("#", 0) == 0 && nl != std::string::npos) body.erase(0, nl + 1);
    for (const auto& [key, value] : fields) {
        const std::string token = "{" + key + "}";
        for (auto pos = body.find(token); pos != std::string::npos; pos = body.find(token, pos + value.size())) {
            body.replace(pos, token.size(), value);
        }
    }
    return text::trim(body);
}

std::optional<json> parse_json_reply(std::string_view reply) {
    const auto first = reply.find('{');
    const auto last = reply.rfind('}');
    if (first == std::string_view::npos || last == std::string_view::npos || last < first) return std::nullopt;
    try {
        json j = json::parse(reply.substr(first, last - first + 1));
        if (j.is_object()) return j;
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

}  // namespace clarifier

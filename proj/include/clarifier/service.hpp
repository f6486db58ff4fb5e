#pragma once

// HTTP front end: sessions that run the pipeline and pause on questions,
// plus stateless vision and pointing endpoints.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "clarifier/gateway.hpp"
#include "clarifier/orchestrator.hpp"

namespace clarifier::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    PipelineConfig pipeline;
    /// Relative asset paths in request bodies resolve here (trusted local mode).
    std::filesystem::path asset_root = ".";
    /// When set, /v1 routes require "Authorization: Bearer <token>".
    std::string auth_token;
    /// JSON Lines log of every request outcome; disabled when empty.
    std::optional<std::filesystem::path> event_log;
    /// Responses remembered per Idempotency-Key.
    std::size_t idempotency_capacity = 512;
    /// Upload limit for request bodies.
    std::size_t max_body_bytes = 64u << 20;
};

/// HTTP status for a library error: provider faults are the server's
/// problem (502, 504 on timeout), everything else the caller's.
int http_status(const Error& e);
json error_body(const Error& e);

class Service {
public:
    Service(Providers providers, ServiceConfig cfg = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Re-runs a session's recorded events (GET /v1/sessions/{id} "events")
/// and returns the last outcome.
json replay_session(const json& events, const Providers& providers, const PipelineConfig& cfg = {},
                    const std::filesystem::path& asset_root = ".");

/// Draws the pointing ray's projection from the fingertip to the hit on a
/// copy of `image`.
RgbImage draw_ray_overlay(const RgbImage& image, const GroundingResult& g, const CameraIntrinsics& k);

}  // namespace clarifier::service

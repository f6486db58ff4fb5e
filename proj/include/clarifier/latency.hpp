#pragma once

// Per-stage wall-clock timing of the image-based and cross-modal clarifiers,
// averaged over frames after a warm-up pass.

#include <filesystem>
#include <string>
#include <vector>

#include "clarifier/gateway.hpp"
#include "clarifier/orchestrator.hpp"

namespace clarifier {

struct LatencyRow {
    std::string stage;
    double avg_ms = 0.0;
    int frames = 0;  // 0 when the stage could not run
};

struct LatencyTable {
    std::string title;
    std::vector<LatencyRow> rows;

    /// "| Stage | Avg. latency (ms) |" markdown table.
    std::string markdown() const;
    json to_json() const;
};

struct LatencyReport {
    LatencyTable image_based;
    LatencyTable cross_modal;
    /// Keypoints + fusion + ray, averaged per frame.
    double geometric_ms_per_frame = 0.0;
    int frames = 0;

    json to_json() const;
};

struct LatencyConfig {
    int warmup = 1;
    std::string query = "What is this?";
    PipelineConfig pipeline;
};

/// Times every stage on each scene directory (scenegen layout). The VLM
/// stage uses `providers.vlm` with the scene id and `cfg.query`.
LatencyReport bench_latency(const std::vector<std::filesystem::path>& scenes, const Providers& providers,
                            const LatencyConfig& cfg = {});

}  // namespace clarifier

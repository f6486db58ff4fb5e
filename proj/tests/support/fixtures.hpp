#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clarifier/eval.hpp"
#include "clarifier/gateway.hpp"
#include "clarifier/scenegen.hpp"

namespace clarifier::testing {

namespace fs = std::filesystem;

/// tests/data in the source tree.
fs::path data_dir();
fs::path golden_dir();

/// Fresh empty directory under the system temp dir.
fs::path temp_dir(const std::string& name);

std::vector<scenegen::SceneSpec> load_specs(const fs::path& jsonl);

/// Generates the mini-benchmark scenes next to a copy of its manifest and
/// transcript. Returns the manifest path.
fs::path prepare_mini_bench(const fs::path& dir);

/// Differences between a report and a hand-computed expectation file
/// (metrics as [numerator, denominator], per-record fields). Empty = match.
std::vector<std::string> compare_report(const eval::MetricReport& report, const json& expected);

/// Scripted chat/VLM from `transcript`, file raster providers, token-F1 judge.
Providers scripted_providers(const fs::path& transcript);

/// Ground-truth-free scene with one target and a gesture aimed at it.
scenegen::SceneSpec gesture_spec(std::uint64_t seed);

}  // namespace clarifier::testing

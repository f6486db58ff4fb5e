#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>

#include <unistd.h>

#include "clarifier/text.hpp"

namespace clarifier::testing {

fs::path data_dir() { return CLARIFIER_TEST_DATA; }
fs::path golden_dir() { return CLARIFIER_TEST_GOLDEN; }

fs::path temp_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("clarifier-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<scenegen::SceneSpec> load_specs(const fs::path& jsonl) {
    std::ifstream in(jsonl);
    if (!in) throw std::runtime_error("cannot open " + jsonl.string());
    std::vector<scenegen::SceneSpec> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) out.push_back(scenegen::spec_from_json(json::parse(line)));
    }
    return out;
}

fs::path prepare_mini_bench(const fs::path& dir) {
    const fs::path src = data_dir() / "mini_bench";
    fs::create_directories(dir / "scenes");
    for (const auto& spec : load_specs(src / "scenes.jsonl")) {
        const auto bundle = scenegen::generate(spec);
        scenegen::write_bundle(bundle, dir / "scenes" / bundle.id);
    }
    for (const char* f : {"manifest.jsonl", "transcript.json", "expected_report.json"}) {
        fs::copy_file(src / f, dir / f, fs::copy_options::overwrite_existing);
    }
    return dir / "manifest.jsonl";
}

namespace {

bool fraction_matches(const json& got, const json& want) {
    const double w = want.at(0).get<double>() / want.at(1).get<double>();
    return got.is_number() && std::abs(got.get<double>() - w) <= 1e-12;
}

}  // namespace

std::vector<std::string> compare_report(const eval::MetricReport& report, const json& expected) {
    std::vector<std::string> diffs;
    const json got = report.to_json();
    for (const auto& [name, want] : expected.at("metrics").items()) {
        const json& m = got.at("metrics").at(name);
        if (name == "mean_semantic_score") {
            if (!fraction_matches(m, want)) diffs.push_back(name + ": got " + m.dump() + ", want " + want.dump());
            continue;
        }
        if (m.at("numerator") != want.at(0) || m.at("denominator") != want.at(1)) {
            diffs.push_back(name + ": got " + m.at("numerator").dump() + "/" + m.at("denominator").dump() + ", want " +
                            want.dump());
        }
    }
    std::map<std::string, json> by_id;
    for (const auto& r : got.at("records")) by_id[r.at("id").get<std::string>()] = r;
    for (const auto& [id, fields] : expected.at("records").items()) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            diffs.push_back(id + ": missing record");
            continue;
        }
        if (it->second.contains("error")) diffs.push_back(id + ": error " + it->second.at("error").dump());
        for (const auto& [key, want] : fields.items()) {
            const json& have = it->second.at(key);
            const bool ok = key == "answer_score" ? fraction_matches(have, want) : have == want;
            if (!ok) diffs.push_back(id + "." + key + ": got " + have.dump() + ", want " + want.dump());
        }
    }
    return diffs;
}

Providers scripted_providers(const fs::path& transcript) {
    auto chat = std::make_shared<const ScriptedChat>(ScriptedChat::from_file(transcript));
    Providers p;
    p.chat = chat;
    p.vlm = chat;
    p.detector = std::make_shared<FileDetector>();
    p.depth = std::make_shared<FileDepthEstimator>();
    p.handseg = std::make_shared<FileHandSegmenter>();
    p.judge = std::make_shared<TokenF1Judge>();
    return p;
}

scenegen::SceneSpec gesture_spec(std::uint64_t seed) {
    scenegen::SceneSpec s;
    s.seed = seed;
    s.wall_depth = 3.0;
    scenegen::TargetSpec t;
    t.label = "mug";
    t.x0 = 360;
    t.y0 = 120;
    t.x1 = 520;
    t.y1 = 260;
    t.depth = 2.0;
    s.targets.push_back(t);
    scenegen::GestureSpec g;
    g.tip = {200.0, 380.0};
    g.aim = {440.0, 190.0};
    g.tip_depth = 0.5;
    s.gesture = g;
    return s;
}

}  // namespace clarifier::testing

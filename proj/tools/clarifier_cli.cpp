// Command-line front end: offline runs of each component, the evaluation
// harness, scene generation, latency tables and the HTTP service.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "clarifier/assets.hpp"
#include "clarifier/eval.hpp"
#include "clarifier/latency.hpp"
#include "clarifier/orchestrator.hpp"
#include "clarifier/scenegen.hpp"
#include "clarifier/serialize.hpp"
#include "clarifier/service.hpp"
#include "clarifier/text.hpp"

namespace fs = std::filesystem;
using namespace clarifier;

namespace {

struct Globals {
    std::string config;
    std::string provider_mode;
    std::string transcript;
    std::string out;
    std::uint64_t seed = 0;
    std::string log_level = "warn";
};

json load_config(const Globals& g) {
    if (g.config.empty()) return json::object();
    return json::parse(assets::read_text(g.config));
}

GatewayConfig gateway_config(const Globals& g) {
    GatewayConfig gw = GatewayConfig::from_json(load_config(g));
    if (!g.provider_mode.empty()) gw.override_mode(provider_mode_from_string(g.provider_mode));
    if (!g.transcript.empty()) gw.chat.asset_path = gw.vlm.asset_path = g.transcript;
    return gw;
}

PipelineConfig pipeline_config(const Globals& g) {
    PipelineConfig p;
    const json c = load_config(g);
    if (c.contains("pipeline")) from_json(c.at("pipeline"), p);
    return p;
}

void emit(const Globals& g, const std::string& body) {
    if (g.out.empty()) {
        std::cout << body;
        if (!body.empty() && body.back() != '\n') std::cout << "\n";
        return;
    }
    if (g.out != "-" && fs::path(g.out).has_parent_path()) fs::create_directories(fs::path(g.out).parent_path());
    assets::write_text(g.out, body.back() == '\n' ? body : body + "\n");
}

std::optional<std::string> read_answer(const PendingQuestion& q) {
    std::cerr << "[" << q.round << "] " << q.question << "\n> " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return std::nullopt;
    return line;
}

BBox parse_box(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
    require(v.size() == 4, "--box expects x_min,y_min,x_max,y_max");
    return {v[0], v[1], v[2], v[3]};
}

std::vector<fs::path> scene_dirs(const fs::path& root) {
    std::vector<fs::path> out;
    if (fs::exists(root / "scene.json")) return {root};
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "scene.json")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intent clarification toolkit for egocentric assistants"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON config file (providers, pipeline)");
    app.add_option("--provider-mode", g.provider_mode, "Force every provider into one mode")
        ->check(CLI::IsMember({"remote", "scripted", "file"}));
    app.add_option("--transcript", g.transcript, "Scripted chat transcript (overrides the config)");
    app.add_option("--out", g.out, "Output file (default stdout)");
    app.add_option("--seed", g.seed, "Seed for generated data");
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error");

    // clarify-text
    auto* clarify = app.add_subcommand("clarify-text", "Interactive clarification dialogue on stdin/stdout");
    std::string c_text, c_script;
    clarify->add_option("--text", c_text, "User request")->required();
    clarify->add_option("--script-id", c_script, "Transcript id for scripted providers");

    // assess-image
    auto* assess = app.add_subcommand("assess-image", "Capture-quality assessment and guidance");
    std::string a_image, a_label, a_box, a_text;
    assess->add_option("--image", a_image, "Image file or scene directory")->required();
    auto* a_box_opt = assess->add_option("--box", a_box, "Target box x_min,y_min,x_max,y_max");
    auto* a_label_opt = assess->add_option("--label", a_label, "Detector label");
    assess->add_option("--text", a_text, "Query to extract the label from")->excludes(a_label_opt)->excludes(a_box_opt);
    a_box_opt->excludes(a_label_opt);

    // ground-pointing
    auto* ground = app.add_subcommand("ground-pointing", "Ground a pointing gesture in the depth map");
    std::string gp_image, gp_depth, gp_mask, gp_overlay;
    ground->add_option("--image", gp_image, "Image file or scene directory")->required();
    ground->add_option("--depth", gp_depth, "Depth map (.pfm or 16-bit PNG with sidecar)");
    ground->add_option("--mask", gp_mask, "Hand mask PNG");
    ground->add_option("--overlay", gp_overlay, "Write the ray overlay PNG here");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Full multimodal pipeline; questions are answered on stdin");
    std::string p_text, p_image, p_script;
    pipe->add_option("--text", p_text, "User query")->required();
    pipe->add_option("--image", p_image, "Image file or scene directory");
    pipe->add_option("--script-id", p_script, "Transcript id for scripted providers");

    // eval
    auto* ev = app.add_subcommand("eval", "Run the evaluation harness over a benchmark manifest");
    std::string e_manifest, e_system = "clarifier", e_persona = "cooperative", e_table;
    eval::EvalConfig e_cfg;
    ev->add_option("--manifest", e_manifest, "JSON Lines manifest")->required()->check(CLI::ExistingFile);
    ev->add_option("--system", e_system, "clarifier|monolithic")->check(CLI::IsMember({"clarifier", "monolithic"}));
    ev->add_option("--persona", e_persona, "cooperative|evasive")->check(CLI::IsMember({"cooperative", "evasive"}));
    ev->add_option("--theta-match", e_cfg.theta_match, "Unit/attribute match threshold");
    ev->add_option("--theta-ans", e_cfg.theta_ans, "Answer judge threshold");
    ev->add_option("--threads", e_cfg.threads, "Worker threads (0 = all cores)");
    ev->add_flag("--remote-disentangle", e_cfg.remote_disentangle, "Split questions with the chat provider");
    ev->add_option("--table", e_table, "Also write the human-readable table here");

    // gen-scenes
    auto* gen = app.add_subcommand("gen-scenes", "Write procedural scenes with ground truth");
    int gs_count = 1;
    std::string gs_specs;
    gen->add_option("--count", gs_count, "Number of consecutive seeds")->check(CLI::PositiveNumber);
    gen->add_option("--specs", gs_specs, "JSON Lines file of scene specs (instead of random seeds)");

    // bench-latency
    auto* bench = app.add_subcommand("bench-latency", "Per-stage latency tables");
    std::string bl_scenes;
    int bl_count = 20, bl_warmup = 1;
    bench->add_option("--scenes", bl_scenes, "Directory of scene directories (default: generate)");
    bench->add_option("--count", bl_count, "Scenes to generate when --scenes is absent")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bl_warmup, "Untimed warm-up frames");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP service");
    service::ServiceConfig s_cfg;
    std::string s_log;
    serve->add_option("--host", s_cfg.host, "Bind address");
    serve->add_option("--port", s_cfg.port, "Port");
    serve->add_option("--asset-root", s_cfg.asset_root, "Base for relative asset paths in requests");
    serve->add_option("--event-log", s_log, "Append request events to this JSON Lines file");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(g.log_level));

    try {
        if (*clarify) {
            const Providers p = make_providers(gateway_config(g));
            const PipelineConfig pc = pipeline_config(g);
            const auto outcome =
                run_clarification(UserRequest{c_text, "en", c_script}, read_answer, p.chat, pc.dialogue);
            emit(g, json(outcome).dump(2));
        } else if (*assess) {
            const Providers p = make_providers(gateway_config(g));
            const PipelineConfig pc = pipeline_config(g);
            const fs::path image_path = assets::locate_scene(a_image).image;
            const RgbImage image = assets::load_image(image_path);
            std::optional<BBox> box;
            std::optional<std::string> label;
            if (!a_box.empty()) {
                box = parse_box(a_box);
            } else {
                label = !a_label.empty() ? a_label : extract_entity(*p.chat, a_text.empty() ? "this" : a_text);
                const auto found = detect(*p.detector, image, *label);
                if (!found.empty()) box = clamp_to_image(found.front().bbox, {image.width, image.height});
            }
            const auto a = assess_target(image, box, pc.quality);
            emit(g, json{{"label", label ? json(*label) : json(nullptr)},
                         {"box", box ? json(*box) : json(nullptr)},
                         {"assessment", a},
                         {"ok", a.ok()}}
                        .dump(2));
        } else if (*ground) {
            const Providers p = make_providers(gateway_config(g));
            const PipelineConfig pc = pipeline_config(g);
            QueryBundle b;
            b.text = "pointing";
            b.image = std::make_shared<const RgbImage>(assets::load_image(assets::locate_scene(gp_image).image));
            if (!gp_depth.empty()) b.depth = assets::load_depth(gp_depth);
            if (!gp_mask.empty()) b.hand_mask = assets::load_mask(gp_mask);
            std::vector<StageRecord> trace;
            const GroundingResult gr = ground_pointing(b, p, pc, &trace);
            const CameraIntrinsics k = resolve_intrinsics(b, pc);
            if (!gp_overlay.empty()) assets::save_image(service::draw_ray_overlay(*b.image, gr, k), gp_overlay);
            json out = gr;
            out["trace"] = trace;
            emit(g, out.dump(2));
        } else if (*pipe) {
            const Providers p = make_providers(gateway_config(g));
            QueryBundle b;
            b.text = p_text;
            b.script_id = p_script;
            if (!p_image.empty()) {
                b.image = std::make_shared<const RgbImage>(assets::load_image(assets::locate_scene(p_image).image));
            }
            const AnswerChannel channel = read_answer;
            const auto out = run_pipeline(b, p, pipeline_config(g), &channel);
            emit(g, json(out).dump(2));
        } else if (*ev) {
            const Providers p = make_providers(gateway_config(g));
            e_cfg.pipeline = pipeline_config(g);
            const auto samples = eval::load_manifest(e_manifest);
            const auto system = e_system == "clarifier" ? eval::SystemKind::Clarifier : eval::SystemKind::Monolithic;
            const eval::Persona persona(e_persona == "cooperative" ? eval::Persona::Kind::Cooperative
                                                                   : eval::Persona::Kind::Evasive);
            const auto report = eval::evaluate(samples, system, p, e_cfg, persona);
            json j = report.to_json();
            j["config"] = {{"system", e_system},
                           {"persona", e_persona},
                           {"theta_match", e_cfg.theta_match},
                           {"theta_ans", e_cfg.theta_ans},
                           {"samples", samples.size()}};
            emit(g, j.dump(2));
            if (!e_table.empty()) assets::write_text(e_table, report.table());
            if (!g.out.empty()) std::cout << report.table();
        } else if (*gen) {
            require(!g.out.empty(), "gen-scenes needs --out");
            std::vector<scenegen::SceneSpec> specs;
            if (!gs_specs.empty()) {
                std::ifstream in(gs_specs);
                std::string line;
                while (std::getline(in, line)) {
                    if (!text::trim(line).empty()) specs.push_back(scenegen::spec_from_json(json::parse(line)));
                }
            } else {
                for (int i = 0; i < gs_count; ++i) specs.push_back(scenegen::random_spec(g.seed + static_cast<std::uint64_t>(i)));
            }
            for (const auto& spec : specs) {
                const auto bundle = scenegen::generate(spec);
                scenegen::write_bundle(bundle, fs::path(g.out) / bundle.id);
            }
            std::cout << "wrote " << specs.size() << " scenes to " << g.out << "\n";
        } else if (*bench) {
            GatewayConfig gw = gateway_config(g);
            std::vector<fs::path> dirs;
            fs::path tmp;
            if (!bl_scenes.empty()) {
                dirs = scene_dirs(bl_scenes);
            } else {
                tmp = fs::temp_directory_path() / ("clarifier-bench-" + std::to_string(::getpid()));
                std::uint64_t seed = g.seed;
                while (static_cast<int>(dirs.size()) < bl_count) {
                    const auto spec = scenegen::random_spec(seed++);
                    if (!spec.gesture) continue;
                    const auto bundle = scenegen::generate(spec);
                    scenegen::write_bundle(bundle, tmp / bundle.id);
                    dirs.push_back(tmp / bundle.id);
                }
            }
            require(!dirs.empty(), "no scenes to time");
            Providers p = make_providers(gw);
            LatencyConfig lc;
            lc.warmup = bl_warmup;
            lc.pipeline = pipeline_config(g);
            if (gw.vlm.mode != ProviderMode::Remote && gw.vlm.asset_path.empty()) {
                // Canned VLM replies so the table has an LLM row offline.
                auto vlm = std::make_shared<ScriptedChat>();
                for (const auto& d : dirs) {
                    vlm->set("vlm:" + assets::locate_scene(d).id + ":" + text::slug(lc.query), "It is the object you point at.");
                }
                p.vlm = vlm;
            }
            const auto report = bench_latency(dirs, p, lc);
            if (!tmp.empty()) fs::remove_all(tmp);
            std::ostringstream os;
            os << report.image_based.markdown() << "\n" << report.cross_modal.markdown() << "\n";
            os << "Geometric stack (keypoints + fusion + ray): " << report.geometric_ms_per_frame << " ms/frame over "
               << report.frames << " frames\n";
            if (!g.out.empty()) assets::write_text(g.out, report.to_json().dump(2) + "\n");
            std::cout << os.str();
        } else if (*serve) {
            if (!s_log.empty()) s_cfg.event_log = s_log;
            if (const char* tok = std::getenv("CLARIFIER_SERVICE_TOKEN")) s_cfg.auth_token = tok;
            s_cfg.pipeline = pipeline_config(g);
            spdlog::set_level(std::min(spdlog::get_level(), spdlog::level::info));
            service::Service svc(make_providers(gateway_config(g)), s_cfg);
            svc.run();
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]" << (e.stage().empty() ? "" : " in " + e.stage()) << ": "
                  << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "clarifier/eval.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <omp.h>
#include <spdlog/spdlog.h>

#include "clarifier/assets.hpp"
#include "clarifier/serialize.hpp"
#include "clarifier/text.hpp"

namespace clarifier::eval {

namespace fs = std::filesystem;

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Visual: return "visual";
        case Modality::Referential: return "referential";
    }
    return "text";
}

Modality modality_from_string(std::string_view s) {
    const std::string l = text::lower(s);
    if (l == "text" || l == "semantic") return Modality::Text;
    if (l == "visual" || l == "vision" || l == "image") return Modality::Visual;
    if (l == "referential" || l == "pointing" || l == "cross-modal" || l == "cross_modal") return Modality::Referential;
    fail(ErrorCode::InvalidArgument, "unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(SystemKind k) { return k == SystemKind::Clarifier ? "clarifier" : "monolithic"; }

// ---------------------------------------------------------------------------
// Concept lexicon

namespace {

struct Concept {
    const char* name;
    std::vector<std::vector<std::string>> triggers;  // word sequences
};

std::vector<std::vector<std::string>> phrases(std::initializer_list<const char*> items) {
    std::vector<std::vector<std::string>> out;
    for (const char* s : items) out.push_back(text::words(s));
    return out;
}

// Checked in order; the first concept with a trigger in the fragment wins.
const std::vector<Concept>& lexicon() {
    static const std::vector<Concept> lex = {
        {"budget", phrases({"budget", "price", "cost", "costs", "spend", "afford", "expensive", "cheap", "money",
                            "how much"})},
        {"recipient", phrases({"who", "whom", "recipient", "is it for", "are they for"})},
        {"occasion", phrases({"occasion", "event", "celebration", "celebrating"})},
        {"duration", phrases({"how long", "duration"})},
        {"time", phrases({"when", "time", "date", "day", "deadline", "schedule"})},
        {"location", phrases({"where", "location", "place", "city", "address", "destination"})},
        {"quantity", phrases({"how many", "quantity", "number", "amount", "count"})},
        {"color", phrases({"color", "colour", "colors", "colours"})},
        {"size", phrases({"size", "sizes", "big", "large", "small", "dimensions"})},
        {"style", phrases({"style", "prefer", "preference", "taste"})},
        {"purpose", phrases({"purpose", "use it for", "used for"})},
    };
    return lex;
}

const Concept* find_concept(std::string_view name) {
    const std::string l = text::lower(text::trim(name));
    for (const auto& c : lexicon()) {
        if (l == c.name) return &c;
    }
    return nullptr;
}

bool has_phrase(const std::vector<std::string>& words, const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > words.size()) return false;
    for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> s = {
        "a", "an", "the", "of", "to", "for", "in", "on", "at", "by", "with", "and", "or", "is", "are", "be",
        "it", "its", "this", "that", "what", "which", "you", "your", "do", "does", "i", "my", "me", "we",
        "should", "would", "could", "can", "will", "about", "any", "some", "there", "their", "they", "from",
    };
    return s;
}

std::vector<std::vector<std::string>> attribute_triggers(const AttributeTruth& attr) {
    std::vector<std::vector<std::string>> out;
    if (!attr.keywords.empty()) {
        for (const auto& k : attr.keywords) {
            if (auto w = text::words(k); !w.empty()) out.push_back(std::move(w));
        }
        return out;
    }
    if (const Concept* c = find_concept(attr.attribute)) out = c->triggers;
    const std::string& source = attr.attribute.empty() ? attr.description : attr.attribute;
    for (auto& w : text::words(source)) {
        if (!stopwords().contains(w)) out.push_back({w});
    }
    return out;
}

}  // namespace

std::optional<std::string> canonical_concept(std::string_view fragment) {
    const auto w = text::words(fragment);
    for (const auto& c : lexicon()) {
        for (const auto& t : c.triggers) {
            if (has_phrase(w, t)) return std::string(c.name);
        }
    }
    return std::nullopt;
}

bool question_targets(std::string_view question, const AttributeTruth& attr) {
    const auto w = text::words(question);
    for (const auto& t : attribute_triggers(attr)) {
        if (has_phrase(w, t)) return true;
    }
    return false;
}

std::string canonical_question(std::string_view attribute) {
    static const std::map<std::string, std::string> q = {
        {"budget", "What is your budget?"},
        {"recipient", "Who is it for?"},
        {"occasion", "What is the occasion?"},
        {"duration", "How long should it last?"},
        {"time", "When do you need it?"},
        {"location", "Where will it be?"},
        {"quantity", "How many do you need?"},
        {"color", "What color do you prefer?"},
        {"size", "What size do you need?"},
        {"style", "What style do you prefer?"},
        {"purpose", "What is the purpose?"},
    };
    if (const Concept* c = find_concept(attribute)) return q.at(c->name);
    return "Could you tell me the " + text::trim(attribute) + "?";
}

// ---------------------------------------------------------------------------
// Persona

std::string Persona::answer(std::string_view question, const std::vector<AttributeTruth>& truth) const {
    if (kind_ == Kind::Evasive) return std::string(kUnsure);
    std::string out;
    for (const auto& a : truth) {
        if (!question_targets(question, a)) continue;
        if (!out.empty()) out += "; ";
        out += a.value.empty() ? (a.description.empty() ? a.attribute : a.description) : a.value;
    }
    return out.empty() ? std::string(kUnsure) : out;
}

// ---------------------------------------------------------------------------
// Samples

void BenchmarkSample::validate() const {
    require(!id.empty(), "sample id is empty");
    require(!text::trim(query).empty(), "sample '" + id + "' has an empty query");
    switch (modality) {
        case Modality::Text:
            require(gt_vague.has_value(), "text sample '" + id + "' lacks gt_vague");
            break;
        case Modality::Visual:
            require(image.has_value(), "visual sample '" + id + "' lacks an image");
            require(gt_label.has_value() || gt_guidance.has_value(),
                    "visual sample '" + id + "' lacks gt_label and gt_guidance");
            break;
        case Modality::Referential:
            require(image.has_value(), "referential sample '" + id + "' lacks an image");
            require(gt_pointing.has_value() || gt_answer.has_value(),
                    "referential sample '" + id + "' lacks gt_pointing and gt_answer");
            break;
    }
}

namespace {

const json* field(const json& j, std::initializer_list<const char*> names) {
    for (const char* n : names) {
        auto it = j.find(n);
        if (it != j.end() && !it->is_null()) return &*it;
    }
    return nullptr;
}

Priority priority_of(const json& p) {
    if (p.is_number()) {
        const int v = p.get<int>();
        return v >= 3 ? Priority::Critical : v == 2 ? Priority::Important : Priority::Optional;
    }
    const std::string s = p.get<std::string>();
    if (auto named = priority_from_string(s)) return *named;
    if (s == "3") return Priority::Critical;
    if (s == "2") return Priority::Important;
    if (s == "1") return Priority::Optional;
    fail(ErrorCode::InvalidArgument, "unknown priority '" + s + "'");
}

AttributeTruth attribute_from_json(const json& j) {
    AttributeTruth a;
    if (j.is_string()) {
        a.attribute = j.get<std::string>();
        return a;
    }
    if (const json* v = field(j, {"attribute", "name"})) a.attribute = v->get<std::string>();
    if (const json* v = field(j, {"description"})) a.description = v->get<std::string>();
    if (a.attribute.empty()) a.attribute = a.description;
    require(!a.attribute.empty(), "missing attribute without a name: " + j.dump());
    if (const json* v = field(j, {"value", "answer"})) {
        a.value = v->get<std::string>();
    } else if (const json* o = field(j, {"options"}); o && o->is_array() && !o->empty()) {
        a.value = (*o)[0].get<std::string>();
    }
    if (const json* v = field(j, {"keywords"})) a.keywords = v->get<std::vector<std::string>>();
    if (const json* v = field(j, {"priority", "importance"})) a.priority = priority_of(*v);
    return a;
}

DirectionSet guidance_of(const json& j) {
    if (j.is_string()) return directions_from_text(j.get<std::string>());
    DirectionSet out;
    for (const auto& e : j) {
        const std::string s = e.get<std::string>();
        if (auto d = direction_from_string(s)) {
            out.insert(*d);
        } else {
            out.merge(directions_from_text(s));
        }
    }
    return out;
}

fs::path resolve(const json& v, const fs::path& base) {
    fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

}  // namespace

BenchmarkSample sample_from_json(const json& j, const fs::path& base_dir) {
    require(j.is_object(), "benchmark record is not an object");
    BenchmarkSample s;
    if (const json* v = field(j, {"id", "sample_id"})) s.id = v->is_string() ? v->get<std::string>() : v->dump();
    if (const json* v = field(j, {"query", "question", "instruction", "task", "text"})) s.query = v->get<std::string>();
    if (const json* v = field(j, {"image", "rgb", "image_path"})) s.image = resolve(*v, base_dir);
    if (const json* v = field(j, {"depth", "depth_path"})) s.depth = resolve(*v, base_dir);
    if (const json* v = field(j, {"mask", "hand_mask", "mask_path"})) s.mask = resolve(*v, base_dir);
    if (const json* v = field(j, {"gt_vague", "vague"})) s.gt_vague = v->get<bool>();
    if (const json* v = field(j, {"gt_missing_attrs", "missing_details", "missing_attrs"})) {
        for (const auto& e : *v) s.gt_missing_attrs.push_back(attribute_from_json(e));
    }
    if (const json* v = field(j, {"gt_guidance", "guidance"})) {
        s.gt_guidance = guidance_of(*v);
    } else if (const json* n = field(j, {"needs_vision_clarification"}); n && !n->get<bool>()) {
        s.gt_guidance = DirectionSet{};
    }
    if (const json* v = field(j, {"gt_label", "target_object", "label"})) s.gt_label = v->get<std::string>();
    if (const json* v = field(j, {"gt_bbox", "target_bbox", "bbox"})) s.gt_bbox = v->get<BBox>();
    if (const json* v = field(j, {"gt_answer", "answer", "reference_answer"})) s.gt_answer = v->get<std::string>();
    if (const json* v = field(j, {"gt_pointing", "has_pointing", "pointing"})) s.gt_pointing = v->get<bool>();

    if (const json* v = field(j, {"modality", "subset", "type"})) {
        s.modality = modality_from_string(v->get<std::string>());
    } else if (s.gt_pointing || s.gt_answer) {
        s.modality = Modality::Referential;
    } else if (s.image) {
        s.modality = Modality::Visual;
    } else {
        s.modality = Modality::Text;
    }
    s.validate();
    return s;
}

json sample_to_json(const BenchmarkSample& s) {
    json j{{"id", s.id}, {"modality", to_string(s.modality)}, {"query", s.query}};
    if (s.image) j["image"] = s.image->string();
    if (s.depth) j["depth"] = s.depth->string();
    if (s.mask) j["mask"] = s.mask->string();
    if (s.gt_vague) j["gt_vague"] = *s.gt_vague;
    if (!s.gt_missing_attrs.empty()) {
        json attrs = json::array();
        for (const auto& a : s.gt_missing_attrs) {
            json e{{"attribute", a.attribute}, {"priority", to_string(a.priority)}};
            if (!a.description.empty()) e["description"] = a.description;
            if (!a.value.empty()) e["value"] = a.value;
            if (!a.keywords.empty()) e["keywords"] = a.keywords;
            attrs.push_back(std::move(e));
        }
        j["gt_missing_attrs"] = std::move(attrs);
    }
    if (s.gt_guidance) j["gt_guidance"] = directions_to_json(*s.gt_guidance);
    if (s.gt_label) j["gt_label"] = *s.gt_label;
    if (s.gt_bbox) j["gt_bbox"] = *s.gt_bbox;
    if (s.gt_answer) j["gt_answer"] = *s.gt_answer;
    if (s.gt_pointing) j["gt_pointing"] = *s.gt_pointing;
    return j;
}

std::vector<BenchmarkSample> load_manifest(const fs::path& path) {
    const std::string body = assets::read_text(path);
    const fs::path base = path.parent_path();
    std::vector<BenchmarkSample> out;
    const auto first = body.find_first_not_of(" \t\r\n");
    try {
        if (first != std::string::npos && body[first] == '[') {
            for (const auto& e : json::parse(body)) out.push_back(sample_from_json(e, base));
        } else {
            std::istringstream in(body);
            std::string line;
            int lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (text::trim(line).empty()) continue;
                try {
                    out.push_back(sample_from_json(json::parse(line), base));
                } catch (const json::exception& e) {
                    fail(ErrorCode::MalformedAsset, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
                }
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedAsset, path.string() + ": " + e.what());
    }
    std::set<std::string> ids;
    for (const auto& s : out) {
        if (!ids.insert(s.id).second) fail(ErrorCode::MalformedAsset, "duplicate sample id '" + s.id + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage 1: simulate

namespace {

AnswerChannel persona_channel(const Persona& persona, const std::vector<AttributeTruth>& truth) {
    return [&persona, &truth](const PendingQuestion& q) -> std::optional<std::string> {
        return persona.answer(q.question, truth);
    };
}

std::string monolithic_reply(const BenchmarkSample& sample, const ChatProvider& chat) {
    ChatRequest req;
    req.script_key = "mono:" + sample.id;
    req.messages = {{"system", render_prompt("monolithic_baseline.v1", {})}, {"user", sample.query}};
    req.context = {{"op", "monolithic"}, {"id", sample.id}, {"request", sample.query}};
    return text::trim(chat.complete(req).response);
}

}  // namespace

DialogueLog simulate_interaction(const BenchmarkSample& sample, SystemKind system, const Persona& persona,
                                 const ChatProvider& chat, const EvalConfig& cfg) {
    require(sample.modality == Modality::Text, "simulate_interaction needs a text sample");
    DialogueLog log;
    if (system == SystemKind::Monolithic) {
        const std::string reply = monolithic_reply(sample, chat);
        if (reply.find('?') != std::string::npos) {
            log.history.append({reply, persona.answer(reply, sample.gt_missing_attrs), {}});
            log.rounds = 1;
        }
        log.terminated_by = Termination::Resolved;
        return log;
    }
    // Non-owning alias: run_clarification wants shared ownership.
    std::shared_ptr<const ChatProvider> alias(std::shared_ptr<const ChatProvider>{}, &chat);
    const UserRequest u0{sample.query, "en", sample.id};
    const auto outcome = run_clarification(u0, persona_channel(persona, sample.gt_missing_attrs), alias,
                                           cfg.pipeline.dialogue);
    log.history = outcome.history;
    log.rounds = outcome.rounds;
    log.terminated_by = outcome.terminated_by;
    log.capped = outcome.terminated_by == Termination::RoundCap;
    return log;
}

// ---------------------------------------------------------------------------
// Stage 2: disentangle

namespace {

std::vector<std::string> split_fragments(std::string_view question) {
    static const std::set<std::string> conj = {"and", "or", "plus", "also"};
    std::vector<std::string> out;
    std::string chunk;
    auto flush_chunk = [&] {
        std::vector<std::string> cur;
        for (auto& w : text::words(chunk)) {
            if (conj.contains(w)) {
                if (!cur.empty()) out.push_back(std::move(cur.front()));
                cur.clear();
                continue;
            }
            if (cur.empty()) cur.emplace_back();
            if (!cur.front().empty()) cur.front() += ' ';
            cur.front() += w;
        }
        if (!cur.empty()) out.push_back(std::move(cur.front()));
        chunk.clear();
    };
    for (char c : question) {
        if (c == '?' || c == ';' || c == '.' || c == '!' || c == ',') {
            flush_chunk();
        } else {
            chunk += c;
        }
    }
    flush_chunk();
    return out;
}

}  // namespace

std::vector<std::string> disentangle_questions(const DialogueHistory& log, const ChatProvider* chat) {
    if (log.empty()) return {};
    std::vector<std::string> units;
    auto add = [&](std::string u) {
        if (std::find(units.begin(), units.end(), u) == units.end()) units.push_back(std::move(u));
    };

    if (chat) {
        std::string questions;
        for (const auto& t : log.turns) questions += "- " + t.question + "\n";
        ChatRequest req;
        req.script_key = "disentangle:" + text::slug(questions);
        req.messages = {{"system", render_prompt("disentangle.v1", {{"questions", questions}})}};
        json qs = json::array();
        for (const auto& t : log.turns) qs.push_back(t.question);
        req.context = {{"op", "disentangle"}, {"questions", qs}};
        const std::string reply = chat->complete(req).response;
        const auto j = parse_json_reply(reply);
        if (!j || !j->contains("units") || !(*j)["units"].is_array()) {
            fail(ErrorCode::ProviderError, "disentangle reply has no units array");
        }
        for (const auto& u : (*j)["units"]) {
            if (u.is_string() && !text::trim(u.get<std::string>()).empty()) add(text::trim(u.get<std::string>()));
        }
        return units;
    }

    for (const auto& t : log.turns) {
        bool any = false;
        for (const auto& frag : split_fragments(t.question)) {
            if (auto c = canonical_concept(frag)) {
                add(*c + "?");
                any = true;
            }
        }
        if (!any && !text::trim(t.question).empty()) add(text::trim(t.question));
    }
    return units;
}

// ---------------------------------------------------------------------------
// Stage 3: match

RecoverCount match_recovered(const std::vector<std::string>& units, const std::vector<AttributeTruth>& gt,
                             const SemanticJudge& judge, double theta) {
    require(!gt.empty(), "match_recovered needs at least one ground-truth attribute");
    RecoverCount rc;
    rc.total = static_cast<int>(gt.size());
    for (const auto& a : gt) {
        const std::string& desc = a.description.empty() ? a.attribute : a.description;
        for (const auto& u : units) {
            if (judge_semantic(judge, u, desc) >= theta) {
                ++rc.recovered;
                break;
            }
        }
    }
    return rc;
}

GuidanceScore score_guidance(const std::vector<DirectionSet>& pred, const DirectionSet& gold) {
    require(!gold.empty(), "score_guidance needs a non-empty gold set");
    GuidanceScore s;
    for (const auto& p : pred) {
        if (p == gold) s.strict = 1;
        if (std::any_of(p.begin(), p.end(), [&](Direction d) { return gold.contains(d); })) s.loose = 1;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Per-sample evaluation

namespace {

std::string normalized_label(std::string_view s) {
    std::string out;
    for (const auto& w : text::normalized_tokens(s)) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

void init_denominators(const BenchmarkSample& s, SampleRecord& r) {
    switch (s.modality) {
        case Modality::Text:
            if (s.gt_vague) r.vagueness.denominator = 1;
            if (s.gt_vague.value_or(false)) {
                r.rounds.denominator = 1;
                r.details.denominator = static_cast<long long>(s.gt_missing_attrs.size());
            }
            break;
        case Modality::Visual:
            if (s.gt_label) r.target_id.denominator = 1;
            if (s.gt_guidance && !s.gt_guidance->empty()) {
                r.strict.denominator = 1;
                r.loose.denominator = 1;
            }
            break;
        case Modality::Referential:
            if (s.gt_pointing) r.pointing.denominator = 1;
            if (s.gt_answer) r.semantic_answer.denominator = 1;
            break;
    }
}

void eval_text(const BenchmarkSample& s, SystemKind system, const Providers& p, const Persona& persona,
               const EvalConfig& cfg, SampleRecord& r) {
    bool vague = false;
    std::optional<DialogueLog> log;
    if (system == SystemKind::Clarifier) {
        vague = judge_vagueness(UserRequest{s.query, "en", s.id}, *p.chat).vague;
        if (vague && s.gt_vague.value_or(false)) log = simulate_interaction(s, system, persona, *p.chat, cfg);
    } else {
        log = simulate_interaction(s, system, persona, *p.chat, cfg);
        vague = log->rounds > 0;
    }
    r.predicted_vague = vague;
    if (s.gt_vague) r.vagueness.numerator = (vague == *s.gt_vague) ? 1 : 0;
    if (!s.gt_vague.value_or(false) || !vague || !log) return;

    r.rounds.numerator = log->rounds;
    r.capped = log->capped;
    r.units = disentangle_questions(log->history, cfg.remote_disentangle ? p.chat.get() : nullptr);
    if (!s.gt_missing_attrs.empty()) {
        r.details.numerator = match_recovered(r.units, s.gt_missing_attrs, *p.judge, cfg.theta_match).recovered;
    }
}

std::shared_ptr<const RgbImage> load_sample_image(const BenchmarkSample& s) {
    return std::make_shared<const RgbImage>(assets::load_image(*s.image));
}

void eval_visual(const BenchmarkSample& s, SystemKind system, const Providers& p, const EvalConfig& cfg,
                 SampleRecord& r) {
    const auto image = load_sample_image(s);
    if (system == SystemKind::Monolithic) {
        ChatRequest req;
        req.script_key = "guidance:" + s.id;
        req.messages = {{"system", render_prompt("monolithic_baseline.v1", {})}, {"user", s.query}};
        req.image = image;
        req.context = {{"op", "guidance"}, {"id", s.id}, {"request", s.query}};
        r.predicted_directions = directions_from_text(p.vlm->complete(req).response);
    } else {
        std::optional<BBox> box;
        try {
            r.predicted_label = extract_entity(*p.chat, s.query);
            const auto found = detect(*p.detector, *image, *r.predicted_label);
            if (!found.empty()) box = found.front().bbox;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoEntity) throw;
        }
        const auto assessment = assess_target(*image, box, cfg.pipeline.quality);
        for (const auto& m : assessment.guidance) r.predicted_directions.insert(m.direction_components.begin(),
                                                                                m.direction_components.end());
        if (s.gt_label && r.predicted_label && box &&
            normalized_label(*r.predicted_label) == normalized_label(*s.gt_label) &&
            (!s.gt_bbox || iou(*box, *s.gt_bbox) >= cfg.iou_threshold)) {
            r.target_id.numerator = 1;
        }
    }
    if (r.strict.denominator > 0) {
        // All messages of one assessment are shown together, so their
        // components form one predicted set.
        const auto g = score_guidance({r.predicted_directions}, *s.gt_guidance);
        r.strict.numerator = g.strict;
        r.loose.numerator = g.loose;
    }
}

void eval_referential(const BenchmarkSample& s, SystemKind system, const Providers& p, const Persona& persona,
                      const EvalConfig& cfg, SampleRecord& r) {
    QueryBundle b;
    b.text = s.query;
    b.image = load_sample_image(s);
    b.script_id = s.id;
    if (s.depth) b.depth = assets::load_depth(*s.depth);
    if (s.mask) b.hand_mask = assets::load_mask(*s.mask);

    if (system == SystemKind::Monolithic) {
        r.predicted_pointing = false;
        if (s.gt_answer) {
            const std::string scene = assets::locate_scene(*s.image).id;
            r.answer = ground_crop_answer(*p.vlm, *b.image, s.query, scene);
        }
    } else {
        r.predicted_pointing = pointing_intent_detect(b, p, cfg.pipeline.pointing);
        if (s.gt_answer) {
            const AnswerChannel channel = persona_channel(persona, s.gt_missing_attrs);
            const auto out = run_pipeline(b, p, cfg.pipeline, &channel);
            r.answer = out.answer;
            if (!out.answer) {
                for (const auto& c : out.clarification_requests) {
                    if (c.kind == ClarificationRequest::Kind::Failure) r.error = c.code + ": " + c.message;
                }
            }
        }
    }
    if (s.gt_pointing) r.pointing.numerator = (*r.predicted_pointing == *s.gt_pointing) ? 1 : 0;
    if (s.gt_answer && r.answer) {
        r.answer_score = judge_semantic(*p.judge, *r.answer, *s.gt_answer);
        r.semantic_answer.numerator = r.answer_score >= cfg.theta_ans ? 1 : 0;
    }
}

}  // namespace

SampleRecord evaluate_sample(const BenchmarkSample& sample, SystemKind system, const Providers& providers,
                             const Persona& persona, const EvalConfig& cfg) {
    SampleRecord r;
    r.id = sample.id;
    r.modality = sample.modality;
    init_denominators(sample, r);
    try {
        switch (sample.modality) {
            case Modality::Text: eval_text(sample, system, providers, persona, cfg, r); break;
            case Modality::Visual: eval_visual(sample, system, providers, cfg, r); break;
            case Modality::Referential: eval_referential(sample, system, providers, persona, cfg, r); break;
        }
    } catch (const std::exception& e) {
        // Counted as a miss: numerators stay at whatever was earned before the failure.
        r.error = e.what();
        spdlog::warn("sample {} failed: {}", sample.id, e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

void add(Ratio& into, const Ratio& r) {
    into.numerator += r.numerator;
    into.denominator += r.denominator;
}

json ratio_json(const Ratio& r) {
    const auto v = r.value();
    return json{{"numerator", r.numerator}, {"denominator", r.denominator}, {"value", v ? json(*v) : json(nullptr)}};
}

json record_json(const SampleRecord& r) {
    json j{{"id", r.id}, {"modality", to_string(r.modality)}};
    if (!r.error.empty()) j["error"] = r.error;
    switch (r.modality) {
        case Modality::Text:
            j["predicted_vague"] = r.predicted_vague ? json(*r.predicted_vague) : json(nullptr);
            j["vagueness_correct"] = r.vagueness.numerator;
            j["rounds"] = r.rounds.numerator;
            j["units"] = r.units;
            j["recovered"] = r.details.numerator;
            j["attributes"] = r.details.denominator;
            j["capped"] = r.capped;
            break;
        case Modality::Visual:
            j["predicted_label"] = r.predicted_label ? json(*r.predicted_label) : json(nullptr);
            j["target_correct"] = r.target_id.numerator;
            j["predicted_directions"] = directions_to_json(r.predicted_directions);
            j["strict"] = r.strict.numerator;
            j["loose"] = r.loose.numerator;
            break;
        case Modality::Referential:
            j["predicted_pointing"] = r.predicted_pointing ? json(*r.predicted_pointing) : json(nullptr);
            j["pointing_correct"] = r.pointing.numerator;
            j["answer"] = r.answer ? json(*r.answer) : json(nullptr);
            j["answer_score"] = r.answer_score;
            j["answer_recovered"] = r.semantic_answer.numerator;
            break;
    }
    return j;
}

}  // namespace

std::optional<double> MetricReport::mean_semantic_score() const {
    if (semantic_answer_recover_rate.denominator == 0) return std::nullopt;
    return semantic_score_sum / static_cast<double>(semantic_answer_recover_rate.denominator);
}

MetricReport aggregate(std::vector<SampleRecord> records) {
    std::sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });
    MetricReport m;
    for (const auto& r : records) {
        add(m.vagueness_accuracy, r.vagueness);
        add(m.avg_rounds, r.rounds);
        add(m.details_recover_rate, r.details);
        add(m.target_id_accuracy, r.target_id);
        add(m.strict_recover_rate, r.strict);
        add(m.loose_recover_rate, r.loose);
        add(m.pointing_success_accuracy, r.pointing);
        add(m.semantic_answer_recover_rate, r.semantic_answer);
        if (r.semantic_answer.denominator > 0) m.semantic_score_sum += r.answer_score;
    }
    m.records = std::move(records);
    return m;
}

json MetricReport::to_json() const {
    json recs = json::array();
    for (const auto& r : records) recs.push_back(record_json(r));
    const auto mean = mean_semantic_score();
    return json{{"metrics",
                 {{"vagueness_accuracy", ratio_json(vagueness_accuracy)},
                  {"avg_rounds", ratio_json(avg_rounds)},
                  {"details_recover_rate", ratio_json(details_recover_rate)},
                  {"target_id_accuracy", ratio_json(target_id_accuracy)},
                  {"strict_recover_rate", ratio_json(strict_recover_rate)},
                  {"loose_recover_rate", ratio_json(loose_recover_rate)},
                  {"pointing_success_accuracy", ratio_json(pointing_success_accuracy)},
                  {"semantic_answer_recover_rate", ratio_json(semantic_answer_recover_rate)},
                  {"mean_semantic_score", mean ? json(*mean) : json(nullptr)}}},
                {"records", recs}};
}

std::string MetricReport::table() const {
    const std::array<std::pair<const char*, const Ratio*>, 8> rows{{
        {"Vagueness accuracy", &vagueness_accuracy},
        {"Avg. rounds", &avg_rounds},
        {"Details recover rate", &details_recover_rate},
        {"Target identification accuracy", &target_id_accuracy},
        {"Strict recover rate", &strict_recover_rate},
        {"Loose recover rate", &loose_recover_rate},
        {"Pointing success accuracy", &pointing_success_accuracy},
        {"Semantic answer recover rate", &semantic_answer_recover_rate},
    }};
    std::ostringstream os;
    os << "| Metric | Value | n/d |\n|---|---|---|\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& [name, r] : rows) {
        os << "| " << name << " | ";
        if (auto v = r->value()) {
            os << *v;
        } else {
            os << "n/a";
        }
        os << " | " << r->numerator << "/" << r->denominator << " |\n";
    }
    os << "| Mean semantic score | ";
    if (auto v = mean_semantic_score()) {
        os << *v;
    } else {
        os << "n/a";
    }
    os << " | " << semantic_answer_recover_rate.denominator << " |\n";
    return os.str();
}

MetricReport evaluate(const std::vector<BenchmarkSample>& benchmark, SystemKind system, const Providers& providers,
                      const EvalConfig& cfg, const Persona& persona) {
    require(!benchmark.empty(), "benchmark is empty");
    require(providers.chat && providers.judge, "evaluation needs chat and judge providers");
    std::vector<SampleRecord> records(benchmark.size());
    const int n = static_cast<int>(benchmark.size());
    const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        records[static_cast<std::size_t>(i)] =
            evaluate_sample(benchmark[static_cast<std::size_t>(i)], system, providers, persona, cfg);
    }
    return aggregate(std::move(records));
}

// ---------------------------------------------------------------------------
// Simulated analysis model

namespace {

bool answer_gives(const std::string& answer, const std::string& value) {
    const auto have = text::normalized_tokens(answer);
    const auto need = text::normalized_tokens(value);
    if (need.empty()) return false;
    return std::all_of(need.begin(), need.end(),
                       [&](const std::string& w) { return std::find(have.begin(), have.end(), w) != have.end(); });
}

}  // namespace

ChatExchange SimulatedWorldChat::complete(const ChatRequest& request) const {
    const json& ctx = request.context;
    const std::string op = ctx.is_object() ? ctx.value("op", std::string{}) : std::string{};
    const std::string id = ctx.is_object() ? ctx.value("id", std::string{}) : std::string{};
    const auto world = worlds_.find(id);
    const bool modelled = world != worlds_.end() && (op == "analyze" || op == "ask" || op == "summarize" || op == "vague");
    if (!modelled) {
        if (fallback_) return fallback_->complete(request);
        fail(ErrorCode::UnknownScriptKey, "simulated world has no response for '" + request.script_key + "'");
    }
    const auto& attrs = world->second;

    ChatExchange ex;
    ex.messages = request.messages;
    json reply;
    if (op == "analyze" || op == "summarize") {
        json known = json::array();
        json missing = json::array();
        for (const auto& a : attrs) {
            bool given = false;
            for (const auto& t : ctx.at("history")) {
                if (text::lower(t.value("target_item", std::string{})) == text::lower(a.attribute) &&
                    answer_gives(t.value("answer", std::string{}), a.value)) {
                    given = true;
                }
            }
            if (given) {
                known.push_back({{"attribute", a.attribute}, {"value", a.value}});
            } else {
                missing.push_back({{"attribute", a.attribute},
                                   {"priority", to_string(a.priority)},
                                   {"rationale", "the request does not state the " + a.attribute}});
            }
        }
        if (op == "analyze") {
            reply = {{"known", known}, {"missing", missing}};
        } else {
            std::string task = ctx.value("request", std::string{});
            std::string details;
            for (const auto& k : known) {
                if (!details.empty()) details += "; ";
                details += k.at("attribute").get<std::string>() + ": " + k.at("value").get<std::string>();
            }
            if (!details.empty()) task += " (" + details + ")";
            reply = {{"task", task}};
        }
        ex.response = reply.dump();
    } else if (op == "ask") {
        ex.response = canonical_question(ctx.value("attribute", std::string{}));
    } else {
        const bool vague = std::any_of(attrs.begin(), attrs.end(),
                                       [](const AttributeTruth& a) { return a.priority != Priority::Optional; });
        ex.response = json{{"vague", vague}, {"rationale", vague ? "details are missing" : "request is specific"}}.dump();
    }
    ex.messages.push_back({"assistant", ex.response});
    return ex;
}

}  // namespace clarifier::eval

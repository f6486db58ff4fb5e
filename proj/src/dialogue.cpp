#include "clarifier/dialogue.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "clarifier/text.hpp"

namespace clarifier {

std::string_view to_string(Priority p) {
    switch (p) {
        case Priority::Critical: return "critical";
        case Priority::Important: return "important";
        case Priority::Optional: return "optional";
    }
    return "optional";
}

std::optional<Priority> priority_from_string(std::string_view s) {
    const std::string v = text::lower(text::trim(s));
    if (v == "critical") return Priority::Critical;
    if (v == "important") return Priority::Important;
    if (v == "optional") return Priority::Optional;
    return std::nullopt;
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Resolved: return "resolved";
        case Termination::RoundCap: return "round_cap";
        case Termination::UserAbort: return "user_abort";
    }
    return "resolved";
}

void UserRequest::validate() const { require(!text::trim(text).empty(), "user request text must be non-empty"); }

std::string UserRequest::key() const { return script_id.empty() ? text::slug(text) : script_id; }

void IntentAnalysis::validate() const {
    std::set<std::string> seen;
    auto claim = [&](const std::string& name) {
        const std::string n = text::lower(text::trim(name));
        if (n.empty()) fail(ErrorCode::UnparseableAnalysis, "analysis has an empty attribute name");
        if (!seen.insert(n).second) fail(ErrorCode::UnparseableAnalysis, "attribute '" + name + "' listed twice");
    };
    for (const auto& k : known) claim(k.attribute);
    for (const auto& m : missing) claim(m.attribute);
}

void DialogueConfig::validate() const {
    require(max_rounds >= 0, "max_rounds must be non-negative");
    require(max_repairs >= 0, "max_repairs must be non-negative");
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const Turn& t) {
    j = json{{"question", t.question}, {"answer", t.answer}, {"target_item", t.target_item}};
}
void from_json(const json& j, Turn& t) {
    j.at("question").get_to(t.question);
    j.at("answer").get_to(t.answer);
    t.target_item = j.value("target_item", std::string{});
}

void to_json(json& j, const KnownItem& k) { j = json{{"attribute", k.attribute}, {"value", k.value}}; }
void from_json(const json& j, KnownItem& k) {
    j.at("attribute").get_to(k.attribute);
    const auto& v = j.at("value");
    k.value = v.is_string() ? v.get<std::string>() : v.dump();
}

void to_json(json& j, const MissingItem& m) {
    j = json{{"attribute", m.attribute}, {"priority", std::string(to_string(m.priority))}, {"rationale", m.rationale}};
}
void from_json(const json& j, MissingItem& m) {
    j.at("attribute").get_to(m.attribute);
    const auto p = priority_from_string(j.at("priority").get<std::string>());
    if (!p) throw json::other_error::create(501, "unknown priority " + j.at("priority").dump(), &j);
    m.priority = *p;
    m.rationale = j.value("rationale", std::string{});
}

void to_json(json& j, const IntentAnalysis& a) { j = json{{"known", a.known}, {"missing", a.missing}}; }
void from_json(const json& j, IntentAnalysis& a) {
    a.known = j.value("known", json::array()).get<std::vector<KnownItem>>();
    a.missing = j.at("missing").get<std::vector<MissingItem>>();
}

void to_json(json& j, const DialogueSummary& s) {
    j = json{{"task", s.task},
             {"resolved", s.resolved},
             {"unresolved", s.unresolved},
             {"deferred", s.deferred},
             {"known", s.known}};
}

void to_json(json& j, const ClarificationOutcome& o) {
    j = json{{"history", o.history.turns},
             {"summary", o.summary},
             {"rounds", o.rounds},
             {"terminated_by", std::string(to_string(o.terminated_by))}};
}

void to_json(json& j, const PendingQuestion& q) {
    j = json{{"question", q.question}, {"item", q.item}, {"round", q.round}};
}

std::string history_to_jsonl(const DialogueHistory& h) {
    std::string out;
    for (std::size_t i = 0; i < h.turns.size(); ++i) {
        json rec = h.turns[i];
        rec["turn"] = i + 1;
        out += rec.dump() + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Operations

namespace {

std::string render_history(const DialogueHistory& h) {
    if (h.empty()) return "(none)";
    std::ostringstream os;
    for (std::size_t i = 0; i < h.turns.size(); ++i) {
        os << "Q" << i + 1 << ": " << h.turns[i].question << "\nA" << i + 1 << ": " << h.turns[i].answer << "\n";
    }
    return os.str();
}

json request_context(std::string_view op, const UserRequest& u0, const DialogueHistory& h) {
    return json{{"op", op}, {"id", u0.key()}, {"request", u0.text}, {"history", h.turns}};
}

/// Sends `req`, parses the reply with `parse`, and on failure re-asks with
/// the repair prompt. Provider faults propagate untouched.
template <typename Parse>
auto structured_call(const ChatProvider& chat, ChatRequest req, int max_repairs, const Parse& parse)
    -> decltype(parse(std::declval<const json&>())) {
    std::string last_error;
    for (int attempt = 0; attempt <= max_repairs; ++attempt) {
        req.attempt = attempt;
        const std::string reply = chat.complete(req).response;
        auto parsed = parse_json_reply(reply);
        if (!parsed) {
            last_error = "reply is not a JSON object";
        } else {
            try {
                return parse(*parsed);
            } catch (const json::exception& e) {
                last_error = e.what();
            } catch (const Error& e) {
                if (e.code() != ErrorCode::UnparseableAnalysis) throw;
                last_error = e.what();
            }
        }
        req.messages.push_back({"assistant", reply});
        req.messages.push_back({"user", render_prompt("repair_json.v1", {{"error", last_error}})});
    }
    fail(ErrorCode::UnparseableAnalysis,
         "no parseable reply for '" + req.script_key + "' after " + std::to_string(max_repairs + 1) + " attempts: " + last_error);
}

}  // namespace

IntentAnalysis analyze_intent(const UserRequest& u0, const DialogueHistory& h, const ChatProvider& chat,
                              const DialogueConfig& cfg) {
    u0.validate();
    cfg.validate();
    ChatRequest req;
    req.script_key = "analyze:" + u0.key() + "/" + std::to_string(h.size());
    req.messages = {{"system", render_prompt("analyze_intent.v1", {{"request", u0.text}, {"history", render_history(h)}})},
                    {"user", u0.text}};
    req.context = request_context("analyze", u0, h);
    return structured_call(chat, req, cfg.max_repairs, [](const json& j) {
        auto a = j.get<IntentAnalysis>();
        a.validate();
        return a;
    });
}

std::optional<MissingItem> select_next(const IntentAnalysis& analysis) {
    const MissingItem* best = nullptr;
    for (const auto& m : analysis.missing) {
        if (m.priority == Priority::Optional) continue;
        if (!best || static_cast<int>(m.priority) < static_cast<int>(best->priority)) best = &m;
    }
    if (!best) return std::nullopt;
    return *best;
}

std::string generate_question(const MissingItem& item, const UserRequest& u0, const DialogueHistory& h,
                              const ChatProvider& chat) {
    ChatRequest req;
    req.script_key = "ask:" + u0.key() + "/" + item.attribute;
    req.messages = {{"system", render_prompt("generate_question.v1", {{"attribute", item.attribute},
                                                                      {"rationale", item.rationale},
                                                                      {"request", u0.text},
                                                                      {"history", render_history(h)}})},
                    {"user", u0.text}};
    req.context = request_context("ask", u0, h);
    req.context["attribute"] = item.attribute;
    req.context["priority"] = to_string(item.priority);
    std::string q = text::trim(chat.complete(req).response);
    if (q.empty()) fail(ErrorCode::ProviderError, "chat provider returned an empty question");
    return q;
}

DialogueSummary summarize(const UserRequest& u0, const DialogueHistory& h, const IntentAnalysis& final_analysis,
                          const ChatProvider& chat) {
    DialogueSummary s;
    s.known = final_analysis.known;
    std::set<std::string> still_missing;
    for (const auto& m : final_analysis.missing) {
        still_missing.insert(text::lower(m.attribute));
        (m.priority == Priority::Optional ? s.deferred : s.unresolved).push_back(m);
    }
    for (const auto& t : h.turns) {
        if (t.target_item.empty() || still_missing.contains(text::lower(t.target_item))) continue;
        auto it = std::find_if(s.resolved.begin(), s.resolved.end(),
                               [&](const KnownItem& k) { return k.attribute == t.target_item; });
        if (it == s.resolved.end()) {
            s.resolved.push_back({t.target_item, t.answer});
        } else {
            it->value = t.answer;
        }
    }

    ChatRequest req;
    req.script_key = "summarize:" + u0.key();
    req.messages = {{"system", render_prompt("summarize.v1", {{"request", u0.text},
                                                              {"known", json(final_analysis.known).dump()},
                                                              {"history", render_history(h)}})},
                    {"user", u0.text}};
    req.context = request_context("summarize", u0, h);
    req.context["known"] = final_analysis.known;
    const std::string reply = chat.complete(req).response;
    if (auto j = parse_json_reply(reply); j && j->contains("task") && (*j)["task"].is_string()) {
        s.task = (*j)["task"].get<std::string>();
    } else {
        s.task = text::trim(reply);
    }
    if (s.task.empty()) fail(ErrorCode::ProviderError, "chat provider returned an empty summary");
    return s;
}

VaguenessJudgement judge_vagueness(const UserRequest& u0, const ChatProvider& chat) {
    u0.validate();
    ChatRequest req;
    req.script_key = "vague:" + u0.key();
    req.messages = {{"system", render_prompt("judge_vagueness.v1", {{"request", u0.text}})}, {"user", u0.text}};
    req.context = request_context("vague", u0, {});
    return structured_call(chat, req, DialogueConfig{}.max_repairs, [](const json& j) {
        return VaguenessJudgement{j.at("vague").get<bool>(), j.value("rationale", std::string{})};
    });
}

// ---------------------------------------------------------------------------
// Session

ClarificationSession::ClarificationSession(UserRequest u0, std::shared_ptr<const ChatProvider> chat, DialogueConfig cfg)
    : u0_(std::move(u0)), chat_(std::move(chat)), cfg_(cfg) {
    u0_.validate();
    cfg_.validate();
    require(chat_ != nullptr, "clarification needs a chat provider");
}

std::optional<PendingQuestion> ClarificationSession::start() {
    require(!started_, "clarification session already started");
    started_ = true;
    return advance();
}

std::optional<PendingQuestion> ClarificationSession::answer(std::string text) {
    require(started_ && pending_.has_value(), "no question is awaiting an answer");
    history_.append({pending_->question, std::move(text), pending_->item.attribute});
    pending_.reset();
    return advance();
}

void ClarificationSession::abort() {
    require(started_ && !finished(), "only a running session can be aborted");
    pending_.reset();
    finish(Termination::UserAbort);
}

const ClarificationOutcome& ClarificationSession::outcome() const {
    if (!outcome_) fail(ErrorCode::InvalidArgument, "clarification has not finished");
    return *outcome_;
}

std::optional<PendingQuestion> ClarificationSession::advance() {
    try {
        last_ = analyze_intent(u0_, history_, *chat_, cfg_);
        const auto next = select_next(last_);
        if (!next) {
            finish(Termination::Resolved);
            return std::nullopt;
        }
        if (static_cast<int>(history_.size()) >= cfg_.max_rounds) {
            finish(Termination::RoundCap);
            return std::nullopt;
        }
        pending_ = PendingQuestion{generate_question(*next, u0_, history_, *chat_), *next,
                                   static_cast<int>(history_.size()) + 1};
        return pending_;
    } catch (const DialogueError&) {
        throw;
    } catch (const Error& e) {
        throw DialogueError(e, history_);
    }
}

void ClarificationSession::finish(Termination how) {
    ClarificationOutcome out;
    try {
        out.summary = summarize(u0_, history_, last_, *chat_);
    } catch (const Error& e) {
        throw DialogueError(e, history_);
    }
    out.history = history_;
    out.rounds = static_cast<int>(history_.size());
    out.terminated_by = how;
    outcome_ = std::move(out);
}

ClarificationOutcome run_clarification(const UserRequest& u0, const AnswerChannel& answers,
                                       std::shared_ptr<const ChatProvider> chat, const DialogueConfig& cfg) {
    require(static_cast<bool>(answers), "clarification needs an answer channel");
    ClarificationSession session(u0, std::move(chat), cfg);
    auto q = session.start();
    while (q) {
        auto reply = answers(*q);
        if (!reply) {
            session.abort();
            break;
        }
        q = session.answer(std::move(*reply));
    }
    return session.outcome();
}

}  // namespace clarifier

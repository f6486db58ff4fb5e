#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clarifier/error.hpp"
#include "clarifier/gateway.hpp"

namespace clarifier {

enum class Priority { Critical, Important, Optional };

std::string_view to_string(Priority p);
std::optional<Priority> priority_from_string(std::string_view s);

struct UserRequest {
    std::string text;
    std::string locale = "en";
    /// Stable id used to key scripted transcripts; slug(text) when empty.
    std::string script_id;

    void validate() const;
    std::string key() const;
};

struct Turn {
    std::string question;
    std::string answer;
    std::string target_item;
};

struct DialogueHistory {
    std::vector<Turn> turns;

    void append(Turn t) { turns.push_back(std::move(t)); }
    std::size_t size() const { return turns.size(); }
    bool empty() const { return turns.empty(); }
};

struct KnownItem {
    std::string attribute;
    std::string value;
    bool operator==(const KnownItem&) const = default;
};

struct MissingItem {
    std::string attribute;
    Priority priority = Priority::Important;
    std::string rationale;
    bool operator==(const MissingItem&) const = default;
};

struct IntentAnalysis {
    std::vector<KnownItem> known;
    std::vector<MissingItem> missing;

    /// Attribute names unique across known and missing.
    void validate() const;
};

struct DialogueSummary {
    std::string task;
    std::vector<KnownItem> resolved;       // exactly the attributes answered in the dialogue
    std::vector<MissingItem> unresolved;   // critical/important items still missing
    std::vector<MissingItem> deferred;     // optional items never asked about
    std::vector<KnownItem> known;          // K_t of the final analysis
};

enum class Termination { Resolved, RoundCap, UserAbort };

std::string_view to_string(Termination t);

struct ClarificationOutcome {
    DialogueHistory history;
    DialogueSummary summary;
    int rounds = 0;
    Termination terminated_by = Termination::Resolved;
};

struct DialogueConfig {
    int max_rounds = 8;
    int max_repairs = 2;  // R

    void validate() const;
};

struct VaguenessJudgement {
    bool vague = false;
    std::string rationale;
};

/// Thrown when a provider fails mid-dialogue; keeps what was said so far.
class DialogueError : public Error {
public:
    DialogueError(const Error& cause, DialogueHistory partial)
        : Error(cause.code(), cause.what(), cause.stage().empty() ? "dialogue" : cause.stage()),
          partial_(std::move(partial)) {}
    const DialogueHistory& partial_history() const noexcept { return partial_; }

private:
    DialogueHistory partial_;
};

/// Structured-output analysis of the request and history. Malformed replies
/// are retried with a repair prompt up to cfg.max_repairs times.
IntentAnalysis analyze_intent(const UserRequest& u0, const DialogueHistory& h, const ChatProvider& chat,
                              const DialogueConfig& cfg = {});

/// Highest-priority missing item, first listed on ties. std::nullopt when
/// only optional items (or nothing) remain.
std::optional<MissingItem> select_next(const IntentAnalysis& analysis);

std::string generate_question(const MissingItem& item, const UserRequest& u0, const DialogueHistory& h,
                              const ChatProvider& chat);

DialogueSummary summarize(const UserRequest& u0, const DialogueHistory& h, const IntentAnalysis& final_analysis,
                          const ChatProvider& chat);

VaguenessJudgement judge_vagueness(const UserRequest& u0, const ChatProvider& chat);

struct PendingQuestion {
    std::string question;
    MissingItem item;
    int round = 0;  // 1-based
};

/// Step-wise clarification loop for callers that cannot block on the user
/// (the HTTP service). start() and answer() each return the next question,
/// or std::nullopt once the outcome is final.
class ClarificationSession {
public:
    ClarificationSession(UserRequest u0, std::shared_ptr<const ChatProvider> chat, DialogueConfig cfg = {});

    std::optional<PendingQuestion> start();
    std::optional<PendingQuestion> answer(std::string text);
    /// Ends the dialogue with terminated_by = user_abort.
    void abort();

    bool started() const { return started_; }
    bool finished() const { return outcome_.has_value(); }
    const std::optional<PendingQuestion>& pending() const { return pending_; }
    const DialogueHistory& history() const { return history_; }
    const UserRequest& request() const { return u0_; }
    /// Valid once finished().
    const ClarificationOutcome& outcome() const;

private:
    std::optional<PendingQuestion> advance();
    void finish(Termination how);

    UserRequest u0_;
    std::shared_ptr<const ChatProvider> chat_;
    DialogueConfig cfg_;
    DialogueHistory history_;
    IntentAnalysis last_;
    std::optional<PendingQuestion> pending_;
    std::optional<ClarificationOutcome> outcome_;
    bool started_ = false;
};

/// Supplies the user's reply to one question. std::nullopt means the user
/// walked away.
using AnswerChannel = std::function<std::optional<std::string>(const PendingQuestion&)>;

ClarificationOutcome run_clarification(const UserRequest& u0, const AnswerChannel& answers,
                                       std::shared_ptr<const ChatProvider> chat, const DialogueConfig& cfg = {});

/// One JSON record per turn, for transcripts on disk.
std::string history_to_jsonl(const DialogueHistory& h);

void to_json(json& j, const Turn& t);
void from_json(const json& j, Turn& t);
void to_json(json& j, const KnownItem& k);
void from_json(const json& j, KnownItem& k);
void to_json(json& j, const MissingItem& m);
void from_json(const json& j, MissingItem& m);
void to_json(json& j, const IntentAnalysis& a);
void from_json(const json& j, IntentAnalysis& a);
void to_json(json& j, const DialogueSummary& s);
void to_json(json& j, const ClarificationOutcome& o);
void to_json(json& j, const PendingQuestion& q);

}  // namespace clarifier

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ipost/recognizers.hpp"

namespace ipost {

// Milliseconds on an injected monotonic clock. No protocol operation ever
// reads wall time.
using ClockMs = std::int64_t;

enum class TokenState { active, expired, consumed };

const char* token_state_name(TokenState state);

struct AuthToken {
    std::string token_id;
    std::string shopper_id;
    ClockMs issued_at = 0;
    ClockMs ttl = 0;
    TokenState state = TokenState::active;
};

// True iff the token is active and clock - issued_at < ttl (exclusive bound).
bool validate_token(const AuthToken& token, ClockMs clock);

struct ItemEntry {
    std::string label;
    std::int64_t unit_price = 0;  // minor currency units
    std::int64_t quantity = 0;
};

enum class EventKind { entry_request, face_authenticated, item_pick, item_putback, exit_request };

const char* event_kind_name(EventKind kind);

struct DetectionEvent {
    EventKind kind = EventKind::item_pick;
    std::string identity;    // auth events
    std::string label;       // item events
    double confidence = 1.0; // item events
    ClockMs timestamp = 0;
};

enum class SessionStatus { active, checked_out, voided };

const char* session_status_name(SessionStatus status);

struct Session {
    std::uint64_t session_id = 0;
    AuthToken token;
    std::map<std::string, ItemEntry> ledger;
    SessionStatus status = SessionStatus::active;
    std::vector<DetectionEvent> event_log;  // accepted events only, append-only
};

struct ReceiptLine {
    std::string label;
    std::int64_t quantity = 0;
    std::int64_t unit_price = 0;
    std::int64_t line_total = 0;
};

struct Receipt {
    std::string receipt_id;
    std::uint64_t session_id = 0;
    std::vector<ReceiptLine> lines;
    std::int64_t total = 0;
    ClockMs issued_at = 0;
};

struct SettlementRecord {
    std::string receipt_id;  // doubles as the idempotency key
    std::string shopper_id;
    std::int64_t amount = 0;
    ClockMs timestamp = 0;
};

std::string serialize_record(const SettlementRecord& record);
SettlementRecord parse_record(const std::string& line);

// Append-only, idempotent settlement log.
class SettlementJournal {
public:
    // Appends iff the receipt_id is unseen; a duplicate is a counted no-op.
    bool settle(const SettlementRecord& record);

    const std::vector<SettlementRecord>& records() const { return records_; }
    std::size_t duplicate_count() const { return duplicates_; }

    std::string serialize() const;
    static SettlementJournal replay(const std::string& text);

private:
    std::vector<SettlementRecord> records_;
    std::set<std::string> seen_;
    std::size_t duplicates_ = 0;
};

void write_journal_file(const SettlementJournal& journal, const std::string& path);
SettlementJournal load_journal_file(const std::string& path);

// True iff the file parses and replaying it re-serializes byte-identically.
bool verify_journal_file(const std::string& path, std::string* message = nullptr);

enum class RejectReason {
    none,
    face_unknown,
    token_expired,
    unknown_item,
    low_confidence,
    putback_below_zero,
    already_settled,
    session_not_found,
    session_voided,
    clock_regression,
};

const char* reject_reason_name(RejectReason reason);

struct EngineConfig {
    ClockMs token_ttl = 30 * 60 * 1000;  // 30 minutes
    double confidence_floor = 0.5;
    std::map<std::string, std::int64_t> price_table;
};

struct EntryResult {
    bool accepted = false;
    std::uint64_t session_id = 0;
    AuthToken token;
    RejectReason reason = RejectReason::none;
};

struct EventResult {
    bool accepted = false;
    RejectReason reason = RejectReason::none;
};

struct CheckoutResult {
    bool completed = false;
    Receipt receipt;
    SettlementRecord settlement;
    RejectReason reason = RejectReason::none;
};

struct EngineStats {
    std::uint64_t entries_accepted = 0;
    std::uint64_t entries_rejected = 0;
    std::uint64_t events_accepted = 0;
    std::uint64_t events_rejected = 0;
    std::uint64_t checkouts_completed = 0;
    std::uint64_t sessions_voided = 0;
};

// Session lifecycle: entry authentication issues a token, item events build
// the ledger, checkout totals the ledger and consumes the token.
class CheckoutEngine {
public:
    explicit CheckoutEngine(EngineConfig config);

    EntryResult request_entry(const MatchResult& match, ClockMs clock);
    EventResult record_event(std::uint64_t session_id, DetectionEvent event, ClockMs clock);
    CheckoutResult checkout(std::uint64_t session_id, ClockMs clock);

    const Session* find_session(std::uint64_t session_id) const;
    std::size_t session_count() const { return sessions_.size(); }
    const std::map<std::uint64_t, Session>& sessions() const { return sessions_; }

    SettlementJournal& journal() { return journal_; }
    const SettlementJournal& journal() const { return journal_; }
    const EngineStats& stats() const { return stats_; }
    const EngineConfig& config() const { return config_; }

private:
    EngineConfig config_;
    std::map<std::uint64_t, Session> sessions_;
    SettlementJournal journal_;
    EngineStats stats_;
    std::uint64_t next_session_id_ = 1;
};

}  // namespace ipost

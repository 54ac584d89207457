#include "ipost/protocol.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ipost {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

}  // namespace

const char* token_state_name(TokenState state) {
    switch (state) {
        case TokenState::active: return "active";
        case TokenState::expired: return "expired";
        case TokenState::consumed: return "consumed";
    }
    return "?";
}

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::entry_request: return "entry_request";
        case EventKind::face_authenticated: return "face_authenticated";
        case EventKind::item_pick: return "item_pick";
        case EventKind::item_putback: return "item_putback";
        case EventKind::exit_request: return "exit_request";
    }
    return "?";
}

const char* session_status_name(SessionStatus status) {
    switch (status) {
        case SessionStatus::active: return "active";
        case SessionStatus::checked_out: return "checked_out";
        case SessionStatus::voided: return "voided";
    }
    return "?";
}

const char* reject_reason_name(RejectReason reason) {
    switch (reason) {
        case RejectReason::none: return "none";
        case RejectReason::face_unknown: return "face_unknown";
        case RejectReason::token_expired: return "token_expired";
        case RejectReason::unknown_item: return "unknown_item";
        case RejectReason::low_confidence: return "low_confidence";
        case RejectReason::putback_below_zero: return "putback_below_zero";
        case RejectReason::already_settled: return "already_settled";
        case RejectReason::session_not_found: return "session_not_found";
        case RejectReason::session_voided: return "session_voided";
        case RejectReason::clock_regression: return "clock_regression";
    }
    return "?";
}

bool validate_token(const AuthToken& token, ClockMs clock) {
    return token.state == TokenState::active && clock - token.issued_at < token.ttl;
}

std::string serialize_record(const SettlementRecord& record) {
    std::string line = record.receipt_id;
    line += '\t';
    line += record.shopper_id;
    line += '\t';
    line += std::to_string(record.amount);
    line += '\t';
    line += std::to_string(record.timestamp);
    return line;
}

SettlementRecord parse_record(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    if (fields.size() != 4) {
        fail("journal record: expected 4 tab-separated fields, got " +
             std::to_string(fields.size()));
    }
    if (fields[0].empty()) fail("journal record: empty receipt_id");
    SettlementRecord record;
    record.receipt_id = fields[0];
    record.shopper_id = fields[1];
    try {
        record.amount = std::stoll(fields[2]);
        record.timestamp = std::stoll(fields[3]);
    } catch (const std::exception&) {
        fail("journal record: non-integer amount or timestamp in \"" + line + "\"");
    }
    return record;
}

bool SettlementJournal::settle(const SettlementRecord& record) {
    if (seen_.count(record.receipt_id)) {
        ++duplicates_;
        return false;
    }
    seen_.insert(record.receipt_id);
    records_.push_back(record);
    return true;
}

std::string SettlementJournal::serialize() const {
    std::string out;
    for (const auto& record : records_) {
        out += serialize_record(record);
        out += '\n';
    }
    return out;
}

SettlementJournal SettlementJournal::replay(const std::string& text) {
    SettlementJournal journal;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(start, end - start);
        if (!line.empty()) {
            journal.settle(parse_record(line));
        }
        start = end + 1;
    }
    return journal;
}

void write_journal_file(const SettlementJournal& journal, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("write_journal_file: cannot open " + path);
    out << journal.serialize();
}

SettlementJournal load_journal_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("load_journal_file: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return SettlementJournal::replay(buffer.str());
}

bool verify_journal_file(const std::string& path, std::string* message) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (message) *message = "cannot open " + path;
        return false;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string original = buffer.str();

    SettlementJournal journal;
    try {
        journal = SettlementJournal::replay(original);
    } catch (const std::exception& e) {
        if (message) *message = e.what();
        return false;
    }
    if (journal.duplicate_count() > 0) {
        if (message) {
            *message = "journal contains " + std::to_string(journal.duplicate_count()) +
                       " duplicate receipt ids";
        }
        return false;
    }
    if (journal.serialize() != original) {
        if (message) *message = "replayed journal does not re-serialize byte-identically";
        return false;
    }
    if (message) {
        *message = "ok: " + std::to_string(journal.records().size()) + " records";
    }
    return true;
}

CheckoutEngine::CheckoutEngine(EngineConfig config) : config_(std::move(config)) {
    if (config_.token_ttl <= 0) fail("CheckoutEngine: token ttl must be positive");
    for (const auto& [label, price] : config_.price_table) {
        if (price < 0) fail("CheckoutEngine: negative price for " + label);
    }
}

EntryResult CheckoutEngine::request_entry(const MatchResult& match, ClockMs clock) {
    EntryResult result;
    if (match.decision != MatchDecision::accepted) {
        result.reason = RejectReason::face_unknown;
        ++stats_.entries_rejected;
        return result;
    }

    Session session;
    session.session_id = next_session_id_++;
    session.token.token_id = "tok-" + std::to_string(session.session_id);
    session.token.shopper_id = match.identity;
    session.token.issued_at = clock;
    session.token.ttl = config_.token_ttl;
    session.token.state = TokenState::active;

    DetectionEvent entry;
    entry.kind = EventKind::entry_request;
    entry.identity = match.identity;
    entry.timestamp = clock;
    session.event_log.push_back(entry);

    DetectionEvent authed = entry;
    authed.kind = EventKind::face_authenticated;
    session.event_log.push_back(authed);

    result.accepted = true;
    result.session_id = session.session_id;
    result.token = session.token;
    ++stats_.entries_accepted;
    sessions_.emplace(session.session_id, std::move(session));
    return result;
}

EventResult CheckoutEngine::record_event(std::uint64_t session_id, DetectionEvent event,
                                         ClockMs clock) {
    EventResult result;
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
        result.reason = RejectReason::session_not_found;
        ++stats_.events_rejected;
        return result;
    }
    Session& session = it->second;

    if (session.status != SessionStatus::active) {
        result.reason = session.status == SessionStatus::voided ? RejectReason::session_voided
                                                                : RejectReason::already_settled;
        ++stats_.events_rejected;
        return result;
    }
    if (!validate_token(session.token, clock)) {
        if (session.token.state == TokenState::active) {
            session.token.state = TokenState::expired;  // clock-driven terminal transition
        }
        result.reason = RejectReason::token_expired;
        ++stats_.events_rejected;
        return result;
    }
    if (!session.event_log.empty() && clock < session.event_log.back().timestamp) {
        result.reason = RejectReason::clock_regression;
        ++stats_.events_rejected;
        return result;
    }

    event.timestamp = clock;
    if (event.kind == EventKind::item_pick || event.kind == EventKind::item_putback) {
        const auto price = config_.price_table.find(event.label);
        if (price == config_.price_table.end()) {
            result.reason = RejectReason::unknown_item;
            ++stats_.events_rejected;
            return result;
        }
        if (event.confidence < config_.confidence_floor) {
            result.reason = RejectReason::low_confidence;
            ++stats_.events_rejected;
            return result;
        }
        auto entry = session.ledger.find(event.label);
        if (event.kind == EventKind::item_pick) {
            if (entry == session.ledger.end()) {
                session.ledger[event.label] = ItemEntry{event.label, price->second, 1};
            } else {
                entry->second.quantity += 1;
            }
        } else {
            if (entry == session.ledger.end() || entry->second.quantity == 0) {
                result.reason = RejectReason::putback_below_zero;
                ++stats_.events_rejected;
                return result;
            }
            entry->second.quantity -= 1;
        }
    }

    session.event_log.push_back(std::move(event));
    result.accepted = true;
    ++stats_.events_accepted;
    return result;
}

CheckoutResult CheckoutEngine::checkout(std::uint64_t session_id, ClockMs clock) {
    CheckoutResult result;
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
        result.reason = RejectReason::session_not_found;
        return result;
    }
    Session& session = it->second;

    if (session.status == SessionStatus::checked_out) {
        result.reason = RejectReason::already_settled;
        return result;
    }
    if (session.status == SessionStatus::voided) {
        result.reason = RejectReason::session_voided;
        return result;
    }
    if (!validate_token(session.token, clock)) {
        // expiry during shopping voids the session instead of charging
        if (session.token.state == TokenState::active) {
            session.token.state = TokenState::expired;
        }
        session.status = SessionStatus::voided;
        ++stats_.sessions_voided;
        result.reason = RejectReason::token_expired;
        return result;
    }

    Receipt receipt;
    receipt.receipt_id = "rcp-" + std::to_string(session.session_id);
    receipt.session_id = session.session_id;
    receipt.issued_at = clock;
    for (const auto& [label, entry] : session.ledger) {
        if (entry.quantity == 0) continue;
        ReceiptLine line;
        line.label = label;
        line.quantity = entry.quantity;
        line.unit_price = entry.unit_price;
        line.line_total = entry.quantity * entry.unit_price;
        receipt.total += line.line_total;
        receipt.lines.push_back(std::move(line));
    }

    DetectionEvent exit_event;
    exit_event.kind = EventKind::exit_request;
    exit_event.identity = session.token.shopper_id;
    exit_event.timestamp = clock;
    session.event_log.push_back(exit_event);

    session.token.state = TokenState::consumed;
    session.status = SessionStatus::checked_out;
    ++stats_.checkouts_completed;

    SettlementRecord settlement;
    settlement.receipt_id = receipt.receipt_id;
    settlement.shopper_id = session.token.shopper_id;
    settlement.amount = receipt.total;
    settlement.timestamp = clock;
    journal_.settle(settlement);

    result.completed = true;
    result.receipt = std::move(receipt);
    result.settlement = std::move(settlement);
    return result;
}

const Session* CheckoutEngine::find_session(std::uint64_t session_id) const {
    auto it = sessions_.find(session_id);
    return it == sessions_.end() ? nullptr : &it->second;
}

}  // namespace ipost

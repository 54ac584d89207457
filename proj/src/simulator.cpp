#include "ipost/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ipost {

namespace {

enum class Step { arrive, pick, putback, exit_store };

struct ScriptedEvent {
    ClockMs time = 0;
    int shopper = 0;
    int sequence = 0;  // per-shopper step counter, breaks time ties
    Step step = Step::arrive;
    int item_class = -1;  // index into item_spec.class_names
};

struct ShopperScript {
    std::string identity;  // ground truth; empty prefix "stranger-" when unenrolled
    GlyphKind face_glyph = GlyphKind::cross;
    bool unenrolled = false;
};

ClockMs sample_gap(Rng& rng, double mean) {
    const double g = rng.exponential(mean);
    return std::max<ClockMs>(1, static_cast<ClockMs>(std::llround(g)));
}

std::string join_receipt_lines(const Receipt& receipt) {
    std::string out;
    for (const auto& line : receipt.lines) {
        if (!out.empty()) out += ';';
        out += line.label;
        out += '=';
        out += std::to_string(line.quantity);
        out += '@';
        out += std::to_string(line.unit_price);
    }
    return out;
}

// Independent fold over the accepted event log; the oracle the receipt and
// ledger are checked against.
std::map<std::string, std::int64_t> fold_event_log(const Session& session) {
    std::map<std::string, std::int64_t> quantity;
    for (const auto& event : session.event_log) {
        if (event.kind == EventKind::item_pick) quantity[event.label] += 1;
        if (event.kind == EventKind::item_putback) quantity[event.label] -= 1;
    }
    return quantity;
}

}  // namespace

std::string serialize_report(const SimulationReport& report) {
    std::string out;
    const auto field = [&out](const char* name, long long value) {
        out += name;
        out += '\t';
        out += std::to_string(value);
        out += '\n';
    };
    field("shoppers", report.shoppers);
    field("sessions_created", report.sessions_created);
    field("entries_rejected", report.entries_rejected);
    field("entry_false_accepts", report.entry_false_accepts);
    field("entry_false_rejects", report.entry_false_rejects);
    field("checked_out", report.checked_out);
    field("voided", report.voided);
    field("events_accepted", report.events_accepted);
    field("events_rejected", report.events_rejected);
    field("item_misclassifications", report.item_misclassifications);
    field("total_revenue", report.total_revenue);
    field("violations", static_cast<long long>(report.violations.size()));
    for (const auto& violation : report.violations) {
        out += "violation\t";
        out += violation;
        out += '\n';
    }
    for (const auto& receipt : report.receipts) {
        out += "receipt\t";
        out += receipt.receipt_id;
        out += '\t';
        out += std::to_string(receipt.session_id);
        out += '\t';
        out += std::to_string(receipt.total);
        out += '\t';
        out += join_receipt_lines(receipt);
        out += '\n';
    }
    return out;
}

SimulationReport simulate(const ScenarioConfig& scenario, const SyntheticDatasetSpec& item_spec,
                          const NetworkGraph& item_net, const SyntheticDatasetSpec& face_spec,
                          const NetworkGraph& face_net, const EmbeddingGallery& gallery) {
    validate_spec(item_spec);
    validate_spec(face_spec);
    if (scenario.shopper_count < 0) throw std::invalid_argument("simulate: negative shopper count");
    if (scenario.mean_arrival_gap_ms <= 0.0 || scenario.mean_action_gap_ms <= 0.0) {
        throw std::invalid_argument("simulate: mean gaps must be positive");
    }
    if (scenario.mean_picks < 0.0) throw std::invalid_argument("simulate: mean_picks must be >= 0");
    if (scenario.putback_probability < 0.0 || scenario.putback_probability > 1.0) {
        throw std::invalid_argument("simulate: putback_probability must be in [0,1]");
    }
    if (scenario.unknown_face_fraction < 0.0 || scenario.unknown_face_fraction > 1.0) {
        throw std::invalid_argument("simulate: unknown_face_fraction must be in [0,1]");
    }
    for (const auto& name : item_spec.class_names) {
        if (scenario.engine.price_table.count(name) == 0) {
            throw std::invalid_argument("simulate: item class has no price: " + name);
        }
    }
    for (const auto& identity : face_spec.class_names) {
        if (gallery.entries.count(identity) == 0) {
            throw std::invalid_argument("simulate: face identity not enrolled: " + identity);
        }
    }
    const Shape item_shape({item_spec.channels, item_spec.image_size, item_spec.image_size});
    const Shape face_shape({face_spec.channels, face_spec.image_size, face_spec.image_size});
    if (item_net.input_shape != item_shape) {
        throw std::invalid_argument("simulate: item network expects " +
                                    item_net.input_shape.to_string() + ", dataset provides " +
                                    item_shape.to_string());
    }
    if (face_net.input_shape != face_shape) {
        throw std::invalid_argument("simulate: face network expects " +
                                    face_net.input_shape.to_string() + ", dataset provides " +
                                    face_shape.to_string());
    }

    // glyph kinds not used by any enrolled identity play the strangers
    std::set<int> used_kinds;
    for (const GlyphKind kind : face_spec.glyphs) used_kinds.insert(static_cast<int>(kind));
    std::vector<GlyphKind> spare_kinds;
    for (int k = 0; k < kGlyphKindCount; ++k) {
        if (used_kinds.count(k) == 0) spare_kinds.push_back(static_cast<GlyphKind>(k));
    }
    if (scenario.unknown_face_fraction > 0.0 && spare_kinds.empty()) {
        throw std::invalid_argument(
            "simulate: no glyph kinds left for unenrolled shoppers; enroll fewer identities");
    }

    // classifier label indices follow lexicographic class-name order
    std::vector<std::string> sorted_item_names = item_spec.class_names;
    std::sort(sorted_item_names.begin(), sorted_item_names.end());

    // Scripts are drawn shopper by shopper from one stream, so the scenario
    // is fully fixed by the seed before any recognition runs.
    Rng script_rng(scenario.seed);
    std::vector<ShopperScript> scripts(static_cast<std::size_t>(scenario.shopper_count));
    std::vector<ScriptedEvent> events;
    ClockMs arrival = 0;
    for (int i = 0; i < scenario.shopper_count; ++i) {
        ShopperScript& script = scripts[static_cast<std::size_t>(i)];
        arrival += sample_gap(script_rng, scenario.mean_arrival_gap_ms);
        script.unenrolled = script_rng.bernoulli(scenario.unknown_face_fraction);
        if (script.unenrolled) {
            script.identity = "stranger-" + std::to_string(i);
            script.face_glyph =
                spare_kinds[script_rng.uniform_int(static_cast<std::uint32_t>(spare_kinds.size()))];
        } else {
            const auto pick = script_rng.uniform_int(
                static_cast<std::uint32_t>(face_spec.class_names.size()));
            script.identity = face_spec.class_names[pick];
            script.face_glyph = face_spec.glyphs[pick];
        }
        int sequence = 0;
        events.push_back({arrival, i, sequence++, Step::arrive, -1});
        ClockMs t = arrival;
        const int picks = script_rng.poisson(scenario.mean_picks);
        std::vector<int> held;
        for (int p = 0; p < picks; ++p) {
            t += sample_gap(script_rng, scenario.mean_action_gap_ms);
            const int item_class =
                static_cast<int>(script_rng.uniform_int(
                    static_cast<std::uint32_t>(item_spec.class_names.size())));
            held.push_back(item_class);
            events.push_back({t, i, sequence++, Step::pick, item_class});
        }
        for (const int item_class : held) {
            if (!script_rng.bernoulli(scenario.putback_probability)) continue;
            t += sample_gap(script_rng, scenario.mean_action_gap_ms);
            events.push_back({t, i, sequence++, Step::putback, item_class});
        }
        t += sample_gap(script_rng, scenario.mean_action_gap_ms);
        events.push_back({t, i, sequence++, Step::exit_store, -1});
    }
    std::sort(events.begin(), events.end(), [](const ScriptedEvent& a, const ScriptedEvent& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.shopper != b.shopper) return a.shopper < b.shopper;
        return a.sequence < b.sequence;
    });

    CheckoutEngine engine(scenario.engine);
    SimulationReport report;
    report.shoppers = scenario.shopper_count;

    struct ShopperState {
        bool admitted = false;
        std::uint64_t session_id = 0;
        Rng render_rng{0};
    };
    std::vector<ShopperState> states(static_cast<std::size_t>(scenario.shopper_count));
    for (int i = 0; i < scenario.shopper_count; ++i) {
        states[static_cast<std::size_t>(i)].render_rng =
            Rng(scenario.seed + 0x9E3779B9u * static_cast<std::uint32_t>(i + 1));
    }

    const auto violation = [&report](std::uint64_t session_id, const std::string& text) {
        report.violations.push_back("session " + std::to_string(session_id) + ": " + text);
    };

    for (const ScriptedEvent& event : events) {
        const ShopperScript& script = scripts[static_cast<std::size_t>(event.shopper)];
        ShopperState& state = states[static_cast<std::size_t>(event.shopper)];
        switch (event.step) {
            case Step::arrive: {
                const ByteImage face = render_sample(script.face_glyph, face_spec.image_size,
                                                     face_spec.channels, face_spec.noise,
                                                     state.render_rng);
                const MatchResult match = match_face(gallery, embed_face(face_net, image_to_tensor(face)));
                const EntryResult entry = engine.request_entry(match, event.time);
                if (entry.accepted) {
                    state.admitted = true;
                    state.session_id = entry.session_id;
                    ++report.sessions_created;
                    if (script.unenrolled) ++report.entry_false_accepts;
                } else {
                    ++report.entries_rejected;
                    if (!script.unenrolled) ++report.entry_false_rejects;
                }
                break;
            }
            case Step::pick:
            case Step::putback: {
                if (!state.admitted) break;
                const ByteImage shot = render_sample(item_spec.glyphs[static_cast<std::size_t>(event.item_class)],
                                                     item_spec.image_size, item_spec.channels,
                                                     item_spec.noise, state.render_rng);
                const ItemPrediction prediction = classify_item(item_net, image_to_tensor(shot));
                const std::string& predicted =
                    sorted_item_names[static_cast<std::size_t>(prediction.label)];
                if (predicted != item_spec.class_names[static_cast<std::size_t>(event.item_class)]) {
                    ++report.item_misclassifications;
                }
                DetectionEvent detection;
                detection.kind =
                    event.step == Step::pick ? EventKind::item_pick : EventKind::item_putback;
                detection.label = predicted;
                detection.confidence = prediction.probability;
                detection.timestamp = event.time;
                const EventResult result = engine.record_event(state.session_id, detection, event.time);
                if (result.accepted) {
                    ++report.events_accepted;
                } else {
                    ++report.events_rejected;
                }
                break;
            }
            case Step::exit_store: {
                if (!state.admitted) break;
                const Session* before = engine.find_session(state.session_id);
                if (before == nullptr) {
                    violation(state.session_id, "admitted shopper has no session at exit");
                    break;
                }
                const auto expected = fold_event_log(*before);
                const CheckoutResult result = engine.checkout(state.session_id, event.time);
                const Session* after = engine.find_session(state.session_id);
                if (result.completed) {
                    ++report.checked_out;
                    report.total_revenue += result.receipt.total;
                    report.receipts.push_back(result.receipt);
                    // receipt total must equal the fold of accepted events
                    std::int64_t oracle_total = 0;
                    for (const auto& [label, qty] : expected) {
                        if (qty < 0) violation(state.session_id, "negative folded quantity for " + label);
                        oracle_total += qty * scenario.engine.price_table.at(label);
                    }
                    if (oracle_total != result.receipt.total) {
                        violation(state.session_id,
                                  "receipt total " + std::to_string(result.receipt.total) +
                                      " != event-log fold " + std::to_string(oracle_total));
                    }
                    // ledger must be the same fold
                    for (const auto& [label, qty] : expected) {
                        const auto it = after->ledger.find(label);
                        const std::int64_t ledger_qty = it == after->ledger.end() ? 0 : it->second.quantity;
                        if (ledger_qty != qty) {
                            violation(state.session_id, "ledger quantity for " + label + " is " +
                                                            std::to_string(ledger_qty) +
                                                            ", fold says " + std::to_string(qty));
                        }
                    }
                    for (const auto& [label, entry] : after->ledger) {
                        if (entry.quantity < 0) {
                            violation(state.session_id, "negative ledger quantity for " + label);
                        }
                        if (expected.count(label) == 0 && entry.quantity != 0) {
                            violation(state.session_id, "ledger entry " + label + " missing from fold");
                        }
                    }
                    if (after->token.state != TokenState::consumed) {
                        violation(state.session_id, "checked-out token not consumed");
                    }
                    if (after->status != SessionStatus::checked_out) {
                        violation(state.session_id, "completed checkout left status " +
                                                        std::string(session_status_name(after->status)));
                    }
                    // exactly one settlement for this receipt
                    int settled = 0;
                    for (const auto& record : engine.journal().records()) {
                        if (record.receipt_id != result.receipt.receipt_id) continue;
                        ++settled;
                        if (record.amount != result.receipt.total) {
                            violation(state.session_id, "settled amount differs from receipt total");
                        }
                    }
                    if (settled != 1) {
                        violation(state.session_id, "receipt settled " + std::to_string(settled) +
                                                        " times, expected exactly once");
                    }
                } else {
                    if (result.reason != RejectReason::token_expired) {
                        violation(state.session_id, "exit rejected for unexpected reason: " +
                                                        std::string(reject_reason_name(result.reason)));
                    }
                    if (after != nullptr && after->status == SessionStatus::active) {
                        violation(state.session_id, "failed checkout left the session active");
                    }
                }
                break;
            }
        }
    }

    // terminal-state and journal-level checks over the whole run
    int checked_out_sessions = 0;
    for (const auto& [session_id, session] : engine.sessions()) {
        if (session.status == SessionStatus::active) {
            violation(session_id, "session still active after its shopper exited");
        }
        if (session.status == SessionStatus::checked_out) {
            ++checked_out_sessions;
            if (session.token.state != TokenState::consumed) {
                violation(session_id, "checked-out session holds a non-consumed token");
            }
        }
    }
    if (checked_out_sessions != report.checked_out) {
        report.violations.push_back("checked-out session count " +
                                    std::to_string(checked_out_sessions) + " != receipts issued " +
                                    std::to_string(report.checked_out));
    }
    const auto& journal = engine.journal();
    if (journal.records().size() != report.receipts.size()) {
        report.violations.push_back("journal holds " + std::to_string(journal.records().size()) +
                                    " records for " + std::to_string(report.receipts.size()) +
                                    " receipts");
    }
    if (journal.duplicate_count() != 0) {
        report.violations.push_back("journal saw duplicate settlements");
    }
    std::int64_t settled_revenue = 0;
    for (const auto& record : journal.records()) settled_revenue += record.amount;
    if (settled_revenue != report.total_revenue) {
        report.violations.push_back("journal revenue " + std::to_string(settled_revenue) +
                                    " != receipt revenue " + std::to_string(report.total_revenue));
    }
    report.voided = static_cast<int>(engine.stats().sessions_voided);
    report.journal_text = journal.serialize();
    return report;
}

}  // namespace ipost

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipost/dataset.hpp"
#include "ipost/protocol.hpp"
#include "ipost/recognizers.hpp"

namespace ipost {

// One simulated store day: shoppers arrive, authenticate by face, pick and
// put back items, and exit through checkout.
struct ScenarioConfig {
    int shopper_count = 100;
    double mean_arrival_gap_ms = 1500.0;
    double mean_action_gap_ms = 2000.0;
    double mean_picks = 4.0;               // Poisson mean per shopper
    double putback_probability = 0.2;      // per picked item
    double unknown_face_fraction = 0.0;    // shoppers with unenrolled faces
    std::uint32_t seed = 0;
    EngineConfig engine;
};

struct SimulationReport {
    int shoppers = 0;
    int sessions_created = 0;
    int entries_rejected = 0;
    int entry_false_accepts = 0;  // unenrolled shopper admitted
    int entry_false_rejects = 0;  // enrolled shopper denied
    int checked_out = 0;
    int voided = 0;
    int events_accepted = 0;
    int events_rejected = 0;
    int item_misclassifications = 0;  // predicted label differed from ground truth
    std::int64_t total_revenue = 0;   // minor units, sum of receipt totals
    std::vector<Receipt> receipts;    // in checkout order
    std::vector<std::string> violations;  // invariant breaches, empty on a sound run
    std::string journal_text;         // serialized settlement journal
};

// Stable text rendering of a report; equal reports serialize identically.
std::string serialize_report(const SimulationReport& report);

// Runs the scenario against trained networks and an enrollment gallery.
// Every face identity in face_spec must be enrolled; every item class in
// item_spec must be priced in scenario.engine.price_table. Protocol
// invariants are checked inline and land in report.violations.
SimulationReport simulate(const ScenarioConfig& scenario, const SyntheticDatasetSpec& item_spec,
                          const NetworkGraph& item_net, const SyntheticDatasetSpec& face_spec,
                          const NetworkGraph& face_net, const EmbeddingGallery& gallery);

}  // namespace ipost

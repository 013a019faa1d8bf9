#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tforge {

// Event identity, e.g. Chemo_3 = the third chemotherapy administration.
struct EventSymbol {
    std::string kind;
    int ordinal = 1;

    std::string render() const { return kind + "_" + std::to_string(ordinal); }
    auto operator<=>(const EventSymbol&) const = default;
};

// canonical ordering is by rendered name
struct SymbolLess {
    bool operator()(const EventSymbol& a, const EventSymbol& b) const {
        return a.render() < b.render();
    }
};

// Rejects ordinal < 1 or a malformed kind.
EventSymbol canonical_symbol(const std::string& kind, int ordinal);

// Inverse of render(); throws on names that canonical_symbol would reject.
EventSymbol parse_symbol(const std::string& name);

bool valid_kind(const std::string& kind);

struct EventInstance {
    EventSymbol symbol;
    double day = 0.0;  // days since observation start

    bool operator==(const EventInstance&) const = default;
};

struct PatientRecord {
    std::string id;
    std::vector<EventInstance> events;  // sorted by (day, canonical symbol)
    int label = 0;                      // 1 = positive outcome
    std::optional<double> onset_day;    // present iff label == 1
    double window_days = 0.0;

    bool operator==(const PatientRecord&) const = default;
};

struct Cohort {
    std::vector<PatientRecord> patients;
    std::vector<EventSymbol> vocabulary;  // sorted union of observed symbols

    bool operator==(const Cohort&) const = default;
};

// Recomputes the vocabulary from the patients.
void rebuild_vocabulary(Cohort& cohort);

struct Violation {
    std::string patient_id;  // empty for cohort-level problems
    std::string path;
    std::string message;
};

// Every invariant violation, with patient id and field path; empty = valid.
std::vector<Violation> validate_cohort(const Cohort& cohort);

// Input possibility: a symbol with its model-derived relative timing.
struct PossibilityX {
    EventSymbol symbol;
    double tau = 0.0;
};

// Outcome possibility for one run.
struct PossibilityY {
    double p_positive = 0.0;
    double t_hat = 0.0;
};

// vocabulary index: canonical-sorted symbols <-> contiguous ids
struct VocabIndex {
    std::vector<EventSymbol> symbols;
    std::unordered_map<std::string, int> by_name;

    static VocabIndex from(const std::vector<EventSymbol>& vocab);
    int at(const EventSymbol& s) const;
    int find(const EventSymbol& s) const;  // -1 if absent
    size_t size() const { return symbols.size(); }
};

}  // namespace tforge

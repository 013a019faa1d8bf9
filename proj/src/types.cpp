#include "tforge/types.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tforge {

bool valid_kind(const std::string& kind) {
    if (kind.empty()) return false;
    if (!std::isupper(static_cast<unsigned char>(kind[0]))) return false;
    for (char c : kind) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    }
    return true;
}

EventSymbol canonical_symbol(const std::string& kind, int ordinal) {
    if (!valid_kind(kind))
        throw std::invalid_argument("invalid symbol kind: '" + kind + "'");
    if (ordinal < 1)
        throw std::invalid_argument("symbol ordinal must be >= 1, got " +
                                    std::to_string(ordinal));
    return EventSymbol{kind, ordinal};
}

EventSymbol parse_symbol(const std::string& name) {
    auto pos = name.rfind('_');
    if (pos == std::string::npos || pos == 0 || pos + 1 == name.size())
        throw std::invalid_argument("symbol name '" + name +
                                    "' is not of the form <kind>_<ordinal>");
    std::string tail = name.substr(pos + 1);
    for (char c : tail) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw std::invalid_argument("symbol name '" + name +
                                        "' has a non-numeric ordinal suffix");
    }
    int ordinal = 0;
    try {
        ordinal = std::stoi(tail);
    } catch (const std::exception&) {
        throw std::invalid_argument("symbol name '" + name + "' ordinal out of range");
    }
    return canonical_symbol(name.substr(0, pos), ordinal);
}

void rebuild_vocabulary(Cohort& cohort) {
    std::set<EventSymbol, SymbolLess> seen;
    for (const auto& p : cohort.patients)
        for (const auto& ev : p.events) seen.insert(ev.symbol);
    cohort.vocabulary.assign(seen.begin(), seen.end());
}

namespace {

void check_patient(const PatientRecord& p, std::vector<Violation>& out) {
    auto add = [&](const std::string& path, const std::string& msg) {
        out.push_back({p.id, path, msg});
    };

    if (p.id.empty()) add("id", "patient id is empty");
    if (!(p.window_days > 0.0)) add("window_days", "window_days must be positive");

    if (p.label == 1) {
        if (!p.onset_day.has_value()) {
            add("onset_day", "label=1 requires onset_day");
        } else {
            if (*p.onset_day < 0.0) add("onset_day", "onset_day must be non-negative");
            if (*p.onset_day > p.window_days)
                add("onset_day", "onset_day exceeds window_days");
        }
    } else if (p.label == 0) {
        if (p.onset_day.has_value()) add("onset_day", "label=0 forbids onset_day");
    } else {
        add("label", "label must be 0 or 1");
    }

    std::set<std::string> names;
    for (size_t i = 0; i < p.events.size(); ++i) {
        const auto& ev = p.events[i];
        std::string path = "events[" + std::to_string(i) + "]";
        if (!valid_kind(ev.symbol.kind)) add(path + ".kind", "invalid kind");
        if (ev.symbol.ordinal < 1) add(path + ".ordinal", "ordinal must be >= 1");
        if (ev.day < 0.0) add(path + ".day", "day must be non-negative");
        if (ev.day > p.window_days) add(path + ".day", "day exceeds window_days");
        if (!names.insert(ev.symbol.render()).second)
            add(path, "duplicate symbol " + ev.symbol.render());
        if (i > 0) {
            const auto& prev = p.events[i - 1];
            if (ev.day < prev.day) {
                add(path + ".day", "events not sorted by day");
            } else if (ev.day == prev.day &&
                       ev.symbol.render() < prev.symbol.render()) {
                add(path, "same-day events not in canonical symbol order");
            }
        }
    }

    // within a kind, ordinals must strictly increase with day
    std::map<std::string, std::vector<const EventInstance*>> by_kind;
    for (const auto& ev : p.events) by_kind[ev.symbol.kind].push_back(&ev);
    for (auto& [kind, group] : by_kind) {
        std::sort(group.begin(), group.end(),
                  [](const EventInstance* a, const EventInstance* b) {
                      return a->symbol.ordinal < b->symbol.ordinal;
                  });
        for (size_t i = 1; i < group.size(); ++i) {
            if (!(group[i]->day > group[i - 1]->day)) {
                add("events", "kind " + kind + ": ordinal " +
                                  std::to_string(group[i]->symbol.ordinal) +
                                  " does not occur strictly after ordinal " +
                                  std::to_string(group[i - 1]->symbol.ordinal));
            }
        }
    }
}

}  // namespace

std::vector<Violation> validate_cohort(const Cohort& cohort) {
    std::vector<Violation> out;

    std::set<std::string> ids;
    for (const auto& p : cohort.patients) {
        if (!ids.insert(p.id).second)
            out.push_back({p.id, "id", "duplicate patient id"});
        check_patient(p, out);
    }

    std::set<EventSymbol, SymbolLess> observed;
    for (const auto& p : cohort.patients)
        for (const auto& ev : p.events) observed.insert(ev.symbol);
    std::vector<EventSymbol> expect(observed.begin(), observed.end());
    if (expect != cohort.vocabulary)
        out.push_back({"", "vocabulary",
                       "vocabulary does not equal the sorted union of observed symbols"});

    return out;
}

VocabIndex VocabIndex::from(const std::vector<EventSymbol>& vocab) {
    VocabIndex idx;
    idx.symbols = vocab;
    std::sort(idx.symbols.begin(), idx.symbols.end(), SymbolLess{});
    for (size_t i = 0; i < idx.symbols.size(); ++i)
        idx.by_name[idx.symbols[i].render()] = static_cast<int>(i);
    return idx;
}

int VocabIndex::at(const EventSymbol& s) const {
    int i = find(s);
    if (i < 0)
        throw std::out_of_range("symbol not in vocabulary: " + s.render());
    return i;
}

int VocabIndex::find(const EventSymbol& s) const {
    auto it = by_name.find(s.render());
    return it == by_name.end() ? -1 : it->second;
}

}  // namespace tforge

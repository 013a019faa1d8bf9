#include "tforge/cohortgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "tforge/cohort_io.hpp"
#include "tforge/rng.hpp"

using nlohmann::json;

namespace tforge {

std::vector<std::string> validate_genspec(const GenSpec& spec) {
    std::vector<std::string> out;
    if (spec.n_patients < 1) out.push_back("n_patients must be >= 1");
    if (!(spec.window_days > 0.0)) out.push_back("window_days must be positive");
    if (spec.templates.empty()) out.push_back("at least one template required");

    double prev_sum = 0.0;
    std::set<std::string> template_kinds;
    for (size_t t = 0; t < spec.templates.size(); ++t) {
        const auto& tpl = spec.templates[t];
        std::string at = "templates[" + std::to_string(t) + "]";
        prev_sum += tpl.prevalence;
        if (tpl.prevalence < 0.0 || tpl.prevalence > 1.0)
            out.push_back(at + ".prevalence out of [0,1]");
        if (tpl.skip_prob < 0.0 || tpl.skip_prob >= 1.0)
            out.push_back(at + ".skip_prob out of [0,1)");
        if (tpl.steps.empty()) out.push_back(at + " has no steps");
        std::set<std::string> names;
        std::map<std::string, int> last_ordinal;
        for (size_t s = 0; s < tpl.steps.size(); ++s) {
            const auto& st = tpl.steps[s];
            std::string sat = at + ".steps[" + std::to_string(s) + "]";
            if (!valid_kind(st.symbol.kind)) out.push_back(sat + " invalid kind");
            if (st.symbol.ordinal < 1) out.push_back(sat + " ordinal < 1");
            if (!(st.mean_gap_days > 0.0)) out.push_back(sat + " mean_gap_days must be positive");
            if (st.gap_jitter_days < 0.0) out.push_back(sat + " gap_jitter_days negative");
            if (!names.insert(st.symbol.render()).second)
                out.push_back(sat + " repeats symbol " + st.symbol.render());
            auto it = last_ordinal.find(st.symbol.kind);
            if (it != last_ordinal.end() && st.symbol.ordinal <= it->second)
                out.push_back(sat + " same-kind ordinals must increase along the template");
            last_ordinal[st.symbol.kind] = st.symbol.ordinal;
            template_kinds.insert(st.symbol.kind);
        }
    }
    if (!spec.templates.empty() && std::abs(prev_sum - 1.0) > 1e-9)
        out.push_back("template prevalences must sum to 1 (got " +
                      std::to_string(prev_sum) + ")");

    std::set<std::string> noise_names;
    for (size_t i = 0; i < spec.noise_symbols.size(); ++i) {
        const auto& ns = spec.noise_symbols[i];
        std::string at = "noise_symbols[" + std::to_string(i) + "]";
        if (!valid_kind(ns.symbol.kind)) out.push_back(at + " invalid kind");
        if (ns.symbol.ordinal < 1) out.push_back(at + " ordinal < 1");
        if (ns.occurrence_prob < 0.0 || ns.occurrence_prob > 1.0)
            out.push_back(at + ".occurrence_prob out of [0,1]");
        if (!noise_names.insert(ns.symbol.render()).second)
            out.push_back(at + " repeats symbol " + ns.symbol.render());
        // a noise kind colliding with a template kind could break the
        // ordinal/day invariant, so kinds must be disjoint
        if (template_kinds.count(ns.symbol.kind))
            out.push_back(at + " kind collides with a template kind");
    }

    if (!(spec.rule.p_pos_if_early > spec.rule.p_pos_if_late_or_absent))
        out.push_back("rule.p_pos_if_early must exceed rule.p_pos_if_late_or_absent");
    if (spec.rule.p_pos_if_early < 0.0 || spec.rule.p_pos_if_early > 1.0)
        out.push_back("rule.p_pos_if_early out of [0,1]");
    if (spec.rule.p_pos_if_late_or_absent < 0.0 || spec.rule.p_pos_if_late_or_absent > 1.0)
        out.push_back("rule.p_pos_if_late_or_absent out of [0,1]");
    if (!(spec.rule.threshold_day > 0.0)) out.push_back("rule.threshold_day must be positive");
    return out;
}

static std::string patient_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%05d", i + 1);
    return buf;
}

Cohort generate_cohort(const GenSpec& spec, std::vector<PatientTruth>* truth) {
    auto violations = validate_genspec(spec);
    if (!violations.empty())
        throw std::invalid_argument("invalid GenSpec: " + violations.front());

    Rng rng(spec.seed);
    std::vector<double> prevalences;
    for (const auto& t : spec.templates) prevalences.push_back(t.prevalence);

    Cohort cohort;
    cohort.patients.reserve(spec.n_patients);
    if (truth) truth->clear();

    for (int pi = 0; pi < spec.n_patients; ++pi) {
        PatientRecord p;
        p.id = patient_id(pi);
        p.window_days = spec.window_days;

        int tid = static_cast<int>(rng.categorical(prevalences));
        const auto& tpl = spec.templates[tid];

        // event days = cumulative mean gaps + per-event Gaussian jitter, clipped
        // to the window; skipped steps still advance the schedule clock
        double cum = 0.0;
        std::vector<EventInstance> events;
        for (const auto& st : tpl.steps) {
            cum += st.mean_gap_days;
            bool skipped = rng.bernoulli(tpl.skip_prob);
            double jitter = rng.normal(0.0, st.gap_jitter_days);
            if (skipped) continue;
            double day = std::clamp(cum + jitter, 0.0, spec.window_days);
            events.push_back({st.symbol, day});
        }

        // clipping can pile same-kind events onto the window edge; pull earlier
        // ordinals back so ordinals stay strictly increasing with day
        std::map<std::string, std::vector<EventInstance*>> by_kind;
        for (auto& ev : events) by_kind[ev.symbol.kind].push_back(&ev);
        for (auto& [kind, group] : by_kind) {
            std::sort(group.begin(), group.end(),
                      [](const EventInstance* a, const EventInstance* b) {
                          return a->symbol.ordinal < b->symbol.ordinal;
                      });
            for (size_t i = group.size(); i-- > 1;) {
                double limit = group[i]->day - 1e-3;
                if (group[i - 1]->day > limit)
                    group[i - 1]->day = std::max(0.0, limit);
            }
        }

        for (const auto& ns : spec.noise_symbols) {
            bool present = rng.bernoulli(ns.occurrence_prob);
            double day = rng.uniform(0.0, spec.window_days);
            if (present) events.push_back({ns.symbol, day});
        }

        std::sort(events.begin(), events.end(),
                  [](const EventInstance& a, const EventInstance& b) {
                      if (a.day != b.day) return a.day < b.day;
                      return a.symbol.render() < b.symbol.render();
                  });
        p.events = std::move(events);

        std::optional<double> decisive_day;
        for (const auto& ev : p.events)
            if (ev.symbol == spec.rule.decisive_symbol) decisive_day = ev.day;
        bool early = decisive_day.has_value() && *decisive_day < spec.rule.threshold_day;
        double p_pos = early ? spec.rule.p_pos_if_early : spec.rule.p_pos_if_late_or_absent;
        p.label = rng.bernoulli(p_pos) ? 1 : 0;
        if (p.label == 1) {
            double last_day = p.events.empty() ? 0.0 : p.events.back().day;
            p.onset_day = rng.uniform(last_day, spec.window_days);
        }

        if (truth)
            truth->push_back({p.id, tid, decisive_day,
                              early ? "early" : "late_or_absent"});
        cohort.patients.push_back(std::move(p));
    }

    rebuild_vocabulary(cohort);
    auto bad = validate_cohort(cohort);
    if (!bad.empty())
        throw std::runtime_error("generated cohort violates invariants ([" +
                                 bad.front().patient_id + "] " + bad.front().path +
                                 ": " + bad.front().message +
                                 "); window/jitter combination too degenerate");
    return cohort;
}

std::vector<PatientTruth> ground_truth_manifest(const GenSpec& spec, const Cohort& cohort) {
    std::vector<PatientTruth> truth;
    Cohort regen = generate_cohort(spec, &truth);
    if (!(regen == cohort))
        throw std::invalid_argument(
            "ground_truth_manifest: cohort was not produced by this spec");
    return truth;
}

std::string manifest_to_jsonl(const std::vector<PatientTruth>& manifest) {
    std::string out;
    for (const auto& row : manifest) {
        json j{{"id", row.id}, {"template", row.template_id}, {"branch", row.branch}};
        if (row.decisive_day.has_value())
            j["decisive_day"] = *row.decisive_day;
        else
            j["decisive_day"] = nullptr;
        out += j.dump();
        out += '\n';
    }
    return out;
}

static EventSymbol symbol_from_json(const json& j) {
    return EventSymbol{j.at("kind").get<std::string>(), j.at("ordinal").get<int>()};
}

static json symbol_to_json(const EventSymbol& s) {
    return json{{"kind", s.kind}, {"ordinal", s.ordinal}};
}

GenSpec parse_genspec(const std::string& json_text) {
    json j = json::parse(json_text);
    GenSpec spec;
    spec.n_patients = j.at("n_patients").get<int>();
    spec.window_days = j.at("window_days").get<double>();
    spec.seed = j.at("seed").get<uint64_t>();
    for (const auto& tj : j.at("templates")) {
        TrajectoryTemplate tpl;
        tpl.prevalence = tj.at("prevalence").get<double>();
        tpl.skip_prob = tj.value("skip_prob", 0.0);
        for (const auto& sj : tj.at("steps")) {
            TemplateStep st;
            st.symbol = symbol_from_json(sj);
            st.mean_gap_days = sj.at("mean_gap_days").get<double>();
            st.gap_jitter_days = sj.value("gap_jitter_days", 0.0);
            tpl.steps.push_back(std::move(st));
        }
        spec.templates.push_back(std::move(tpl));
    }
    const auto& rj = j.at("rule");
    spec.rule.decisive_symbol = symbol_from_json(rj.at("decisive_symbol"));
    spec.rule.threshold_day = rj.at("threshold_day").get<double>();
    spec.rule.p_pos_if_early = rj.at("p_pos_if_early").get<double>();
    spec.rule.p_pos_if_late_or_absent = rj.at("p_pos_if_late_or_absent").get<double>();
    for (const auto& nj : j.value("noise_symbols", json::array())) {
        NoiseSymbol ns;
        ns.symbol = symbol_from_json(nj);
        ns.occurrence_prob = nj.at("occurrence_prob").get<double>();
        spec.noise_symbols.push_back(std::move(ns));
    }
    return spec;
}

GenSpec load_genspec(const std::string& path) {
    return parse_genspec(read_file(path));
}

std::string genspec_to_json(const GenSpec& spec) {
    json templates = json::array();
    for (const auto& tpl : spec.templates) {
        json steps = json::array();
        for (const auto& st : tpl.steps) {
            json sj = symbol_to_json(st.symbol);
            sj["mean_gap_days"] = st.mean_gap_days;
            sj["gap_jitter_days"] = st.gap_jitter_days;
            steps.push_back(std::move(sj));
        }
        templates.push_back({{"prevalence", tpl.prevalence},
                             {"skip_prob", tpl.skip_prob},
                             {"steps", std::move(steps)}});
    }
    json noise = json::array();
    for (const auto& ns : spec.noise_symbols) {
        json nj = symbol_to_json(ns.symbol);
        nj["occurrence_prob"] = ns.occurrence_prob;
        noise.push_back(std::move(nj));
    }
    json j{{"n_patients", spec.n_patients},
           {"window_days", spec.window_days},
           {"seed", spec.seed},
           {"templates", std::move(templates)},
           {"rule",
            {{"decisive_symbol", symbol_to_json(spec.rule.decisive_symbol)},
             {"threshold_day", spec.rule.threshold_day},
             {"p_pos_if_early", spec.rule.p_pos_if_early},
             {"p_pos_if_late_or_absent", spec.rule.p_pos_if_late_or_absent}}},
           {"noise_symbols", std::move(noise)}};
    return j.dump(2);
}

}  // namespace tforge

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tforge/types.hpp"

namespace tforge {

struct TemplateStep {
    EventSymbol symbol;
    double mean_gap_days = 0.0;    // gap from the previous step (or from day 0)
    double gap_jitter_days = 0.0;  // stddev of Gaussian jitter on the cumulative day
};

struct TrajectoryTemplate {
    std::vector<TemplateStep> steps;
    double prevalence = 0.0;  // fraction of cohort drawn from this template
    double skip_prob = 0.0;   // per-step omission probability
};

// Planted causal rule: decisive event before the threshold raises positive risk.
struct CausalTimingRule {
    EventSymbol decisive_symbol;
    double threshold_day = 0.0;
    double p_pos_if_early = 0.0;
    double p_pos_if_late_or_absent = 0.0;
};

struct NoiseSymbol {
    EventSymbol symbol;
    double occurrence_prob = 0.0;
};

struct GenSpec {
    int n_patients = 0;
    std::vector<TrajectoryTemplate> templates;
    CausalTimingRule rule;
    double window_days = 0.0;
    std::vector<NoiseSymbol> noise_symbols;
    uint64_t seed = 0;
};

// empty = valid; each entry names the first offending field
std::vector<std::string> validate_genspec(const GenSpec& spec);

struct PatientTruth {
    std::string id;
    int template_id = 0;
    std::optional<double> decisive_day;
    std::string branch;  // "early" | "late_or_absent"
};

// Deterministic in spec.seed. Throws on the first violated spec invariant.
Cohort generate_cohort(const GenSpec& spec, std::vector<PatientTruth>* truth = nullptr);

// Per-patient template id, decisive-event day, and rule branch; recomputed by
// regenerating from the spec, so the cohort must be the one the spec produced.
std::vector<PatientTruth> ground_truth_manifest(const GenSpec& spec, const Cohort& cohort);

std::string manifest_to_jsonl(const std::vector<PatientTruth>& manifest);

GenSpec parse_genspec(const std::string& json_text);
GenSpec load_genspec(const std::string& path);
std::string genspec_to_json(const GenSpec& spec);

}  // namespace tforge

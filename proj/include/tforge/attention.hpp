#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tforge/store.hpp"
#include "tforge/types.hpp"

namespace tforge {

class DegenerateSampleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Pearson kurtosis m4 / m2^2 with population central moments.
// Requires n >= 4 and positive sample variance.
double kurtosis(std::span<const double> samples);

// Per-symbol timing distribution summary across (a subset of) the cohort.
struct TimingAttentionStat {
    EventSymbol symbol;
    int n = 0;             // sample size kappa was computed on
    double mean_tau = 0.0;
    double kappa = 0.0;
    std::set<std::string> core_candidates;  // patients within c_mad * MAD of the median
    int c_m = 0;           // |core_candidates|
    int c_t = 0;           // core candidates who actually observed the symbol
    double p_pos = 0.0;    // positive-label fraction within the core set
};

// kappa is computed on the full sample; the core set is the MAD cut
// |tau - median| <= c_mad * MAD. c_m, c_t, p_pos are core-set statistics.
TimingAttentionStat attention_stat(const RunRecord& run, const EventSymbol& symbol,
                                   const Cohort& cohort,
                                   const std::set<std::string>* restrict = nullptr,
                                   double c_mad = 3.0);

struct OmittedSymbol {
    EventSymbol symbol;
    std::string reason;
};

struct AttentionRanking {
    std::vector<TimingAttentionStat> stats;  // kappa descending, ties by symbol
    std::vector<OmittedSymbol> omitted;
};

AttentionRanking rank_by_attention(const RunRecord& run, const Cohort& cohort,
                                   const std::set<std::string>* restrict = nullptr,
                                   double c_mad = 3.0);

}  // namespace tforge

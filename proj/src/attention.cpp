#include "tforge/attention.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "tforge/stats.hpp"

namespace tforge {

double kurtosis(std::span<const double> samples) {
    if (samples.size() < 4)
        throw DegenerateSampleError("kurtosis requires at least 4 samples, got " +
                                    std::to_string(samples.size()));
    double m2 = central_moment(samples, 2);
    if (m2 <= 0.0)
        throw DegenerateSampleError("kurtosis undefined for zero-variance sample");
    double m4 = central_moment(samples, 4);
    return m4 / (m2 * m2);
}

TimingAttentionStat attention_stat(const RunRecord& run, const EventSymbol& symbol,
                                   const Cohort& cohort,
                                   const std::set<std::string>* restrict, double c_mad) {
    VocabIndex vocab = VocabIndex::from(run.tau.symbols);
    int s = vocab.at(symbol);
    if (restrict && restrict->empty())
        throw std::invalid_argument("patient restriction must be non-empty");

    std::unordered_map<std::string, const PatientRecord*> by_id;
    for (const auto& p : cohort.patients) by_id[p.id] = &p;

    std::vector<double> taus;
    std::vector<size_t> rows;
    for (size_t p = 0; p < run.tau.patient_ids.size(); ++p) {
        if (restrict && !restrict->count(run.tau.patient_ids[p])) continue;
        taus.push_back(run.tau.at(p, s));
        rows.push_back(p);
    }

    TimingAttentionStat stat;
    stat.symbol = symbol;
    stat.n = static_cast<int>(taus.size());
    stat.kappa = kurtosis(taus);  // rejects n < 4 and zero variance
    stat.mean_tau = mean(taus);

    double med = median(taus);
    double scale = mad(taus);
    int positives = 0;
    for (size_t i = 0; i < taus.size(); ++i) {
        if (std::abs(taus[i] - med) > c_mad * scale) continue;
        const std::string& id = run.tau.patient_ids[rows[i]];
        stat.core_candidates.insert(id);
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::invalid_argument("run patient " + id + " not in cohort");
        const PatientRecord* rec = it->second;
        bool observed = std::any_of(rec->events.begin(), rec->events.end(),
                                    [&](const EventInstance& ev) {
                                        return ev.symbol == symbol;
                                    });
        if (observed) ++stat.c_t;
        if (rec->label == 1) ++positives;
    }
    stat.c_m = static_cast<int>(stat.core_candidates.size());
    stat.p_pos = stat.c_m > 0 ? static_cast<double>(positives) / stat.c_m : 0.0;
    return stat;
}

AttentionRanking rank_by_attention(const RunRecord& run, const Cohort& cohort,
                                   const std::set<std::string>* restrict, double c_mad) {
    AttentionRanking out;
    for (const auto& symbol : run.tau.symbols) {
        try {
            out.stats.push_back(attention_stat(run, symbol, cohort, restrict, c_mad));
        } catch (const DegenerateSampleError& e) {
            out.omitted.push_back({symbol, e.what()});
        }
    }
    std::stable_sort(out.stats.begin(), out.stats.end(),
                     [](const TimingAttentionStat& a, const TimingAttentionStat& b) {
                         if (a.kappa != b.kappa) return a.kappa > b.kappa;
                         return SymbolLess{}(a.symbol, b.symbol);
                     });
    return out;
}

}  // namespace tforge

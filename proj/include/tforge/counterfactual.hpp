#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tforge/store.hpp"
#include "tforge/types.hpp"

namespace tforge {

struct CfConfig {
    double step_size = 0.05;
    int max_iters = 200;
    double target_p = 0.45;             // stop once p_positive falls to this
    double mu = 0.1;                    // proximity penalty weight
    std::optional<std::vector<EventSymbol>> symbols_free;  // default: all symbols

    std::vector<std::string> validate() const;
};

struct CfPatientResult {
    std::string id;
    std::vector<double> tau_original;  // full vocabulary row
    std::vector<double> tau_cf;
    int iterations = 0;
    double final_p = 1.0;
    bool converged = false;
    bool aborted = false;     // non-finite objective
    int step_halvings = 0;
    std::map<std::string, std::string> dispositions;  // free symbol -> disposition
};

struct CfResult {
    CfConfig config;
    std::vector<EventSymbol> symbols;
    std::vector<CfPatientResult> patients;  // ascending patient id
};

// Positive patients who observed every filter symbol in that order (as a
// subsequence of their canonically ordered events). Empty filter = all
// positive patients.
std::set<std::string> select_cohort(const RunRecord& run, const Cohort& cohort,
                                    const std::vector<EventSymbol>& trajectory_filter);

// Frozen-weight counterfactual: asserts a negative outcome and descends
// BCE(p, 0) + mu * ||tau' - tau||^2 over the patient's free tau values, which
// replace the timing-head outputs in the attention recomputation.
CfPatientResult deduce(const ModelConfig& model_config, const ModelParams& params,
                       const CompiledPatient& patient, std::span<const double> tau0,
                       const std::vector<bool>& free_mask, const CfConfig& cf);

// tau_end = max observed tau + mean adjacent gap of the observed taus
// (gap 1.0 when only one event is observed)
double relative_window_end(std::span<const double> tau0, const std::vector<bool>& observed);

// Partitions each free symbol into unchanged / postponed / advanced /
// canceled. shift_eps defaults to 0.05 * IQR of the patient's tau row.
void classify_disposition(CfPatientResult& entry, const std::vector<bool>& observed,
                          const std::vector<bool>& free_mask,
                          const std::vector<EventSymbol>& symbols,
                          std::optional<double> shift_eps = std::nullopt);

// Runs deduce + classify_disposition over the selected patients. The two
// variants agree bit-exactly; the parallel one distributes patients.
CfResult cf_batch_serial(const RunRecord& run, const Cohort& cohort,
                         const std::set<std::string>& selected, const CfConfig& cf,
                         std::optional<double> shift_eps = std::nullopt);

CfResult cf_batch_parallel(const RunRecord& run, const Cohort& cohort,
                           const std::set<std::string>& selected, const CfConfig& cf,
                           std::optional<double> shift_eps = std::nullopt);

struct KdeResult {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

// Gaussian kernel density on a uniform grid spanning [min-3h, max+3h].
// Default bandwidth is Silverman's rule 0.9*min(sd, IQR/1.34)*n^(-1/5);
// a zero bandwidth (constant sample) is a degenerate-sample error.
KdeResult kde(std::span<const double> samples,
              std::optional<double> bandwidth = std::nullopt, int grid_points = 256);

}  // namespace tforge

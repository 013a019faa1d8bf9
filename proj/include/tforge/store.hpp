#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tforge/kernels.hpp"
#include "tforge/model.hpp"
#include "tforge/types.hpp"

namespace tforge {

// One training instantiation. The artifact carries the trained parameters in
// addition to the TauMap/outcome summaries so downstream counterfactual
// deduction can re-run the forward pass from a persisted store.
struct RunRecord {
    int run_id = 0;
    uint64_t seed = 0;
    ModelConfig config;  // echo; config.seed equals the run seed
    std::string cohort_sha256;
    double final_loss = 0.0;
    std::vector<double> loss_curve;
    TauMap tau;
    std::vector<PossibilityY> outcomes;  // aligned with tau.patient_ids
    ModelParams params;
};

std::string run_record_to_json(const RunRecord& run);
RunRecord parse_run_record(const std::string& text);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text);
// hash of the canonical config serialization with the seed zeroed: runs in a
// store differ only by seed
std::string config_sha256(const ModelConfig& config);

struct StoreManifest {
    std::string cohort_sha256;
    std::string config_sha256;
    int k = 0;
    uint64_t base_seed = 0;
};

struct PossibilityStore {
    std::string dir;
    StoreManifest manifest;
    std::vector<RunRecord> runs;  // ascending run_id
};

class StoreIntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnsembleOutcome {
    PossibilityStore store;
    std::vector<std::pair<int, int>> diverged;  // (run_id, epoch)
    int trained = 0;                            // freshly trained runs
};

// Trains K runs with seeds base_seed..base_seed+K-1 and persists each on
// completion. Resuming over an existing store skips completed run_ids when
// the cohort/config/base-seed hashes match and refuses otherwise.
EnsembleOutcome run_ensemble(const ModelConfig& config, const Cohort& cohort, int k,
                             uint64_t base_seed, const std::string& dir);

PossibilityStore load_store(const std::string& dir);

struct OutcomeDistribution {
    std::vector<PossibilityY> samples;  // one per run
    PossibilityY mean;
    PossibilityY stddev;  // population formula
};

OutcomeDistribution outcome_distribution(const PossibilityStore& store,
                                         const std::string& patient_id);

// Fraction of runs with tau(symbol, a) < tau(symbol, b); exact ties 0.5.
double across_possibility_compare(const PossibilityStore& store, const EventSymbol& symbol,
                                  const std::string& patient_a, const std::string& patient_b);

// Fraction of runs with t_hat(a) > t_hat(b); exact ties 0.5.
double survival_style_onset_compare(const PossibilityStore& store,
                                    const std::string& patient_a,
                                    const std::string& patient_b);

}  // namespace tforge

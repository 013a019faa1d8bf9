#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tforge/model.hpp"
#include "tforge/types.hpp"

namespace tforge {

// Per-run, per-patient relative timing of every vocabulary symbol.
struct TauMap {
    std::vector<std::string> patient_ids;  // row order = cohort order
    std::vector<EventSymbol> symbols;      // column order = canonical vocab order
    std::vector<double> values;            // row-major patients x vocabulary

    double at(size_t patient, size_t symbol) const {
        return values[patient * symbols.size() + symbol];
    }
    int patient_index(const std::string& id) const;
};

struct TrainResult {
    ModelParams params;
    TauMap tau;
    std::vector<PossibilityY> outcomes;  // aligned with tau.patient_ids
    std::vector<double> loss_curve;      // mean full-batch loss per epoch, pre-update
    double final_loss = 0.0;             // mean loss at the final parameters
};

class DivergedError : public std::runtime_error {
public:
    DivergedError(int epoch, double value)
        : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch)),
          epoch(epoch),
          value(value) {}
    int epoch;
    double value;
};

// Mean-loss gradient over the cohort, accumulated block-by-block in patient-id
// order. The block structure fixes the floating-point summation tree, so the
// serial and OpenMP variants produce bit-identical results for any thread
// count; the serial one is the reference the parallel one is tested against.
inline constexpr size_t kGradBlock = 32;

double accumulate_gradients_serial(const ModelConfig& config, const ModelParams& params,
                                   std::span<const CompiledPatient> patients,
                                   std::span<const size_t> id_order,
                                   std::span<double> grad);

double accumulate_gradients_parallel(const ModelConfig& config, const ModelParams& params,
                                     std::span<const CompiledPatient> patients,
                                     std::span<const size_t> id_order,
                                     std::span<double> grad);

// Full-vocabulary timing rows plus outcome possibilities at fixed parameters.
// Rows are written independently per patient; both variants agree bit-exactly.
void infer_taumap_serial(const ModelConfig& config, const ModelParams& params,
                         std::span<const CompiledPatient> patients,
                         const VocabIndex& vocab, TauMap& tau,
                         std::vector<PossibilityY>& outcomes,
                         std::vector<double>* per_patient_loss = nullptr);

void infer_taumap_parallel(const ModelConfig& config, const ModelParams& params,
                           std::span<const CompiledPatient> patients,
                           const VocabIndex& vocab, TauMap& tau,
                           std::vector<PossibilityY>& outcomes,
                           std::vector<double>* per_patient_loss = nullptr);

// Full-batch Adam over the cohort. Deterministic in config.seed; throws
// DivergedError on a non-finite epoch loss.
TrainResult train(const ModelConfig& config, const Cohort& cohort);

}  // namespace tforge

#include "tforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tforge {

int TauMap::patient_index(const std::string& id) const {
    for (size_t i = 0; i < patient_ids.size(); ++i)
        if (patient_ids[i] == id) return static_cast<int>(i);
    return -1;
}

namespace {

size_t block_count(size_t n) { return (n + kGradBlock - 1) / kGradBlock; }

// one block: patients [b*kGradBlock, end) in id order, weight 1/P
double run_block(const ModelConfig& config, const ModelParams& params,
                 std::span<const CompiledPatient> patients,
                 std::span<const size_t> id_order, size_t b, double inv_p,
                 std::span<double> block_grad) {
    size_t lo = b * kGradBlock;
    size_t hi = std::min(lo + kGradBlock, id_order.size());
    double loss_sum = 0.0;
    for (size_t i = lo; i < hi; ++i)
        loss_sum += backward(config, params, patients[id_order[i]], inv_p, block_grad);
    return loss_sum;
}

double merge_blocks(std::span<const double> block_grads,
                    std::span<const double> block_losses, size_t nblocks,
                    size_t nparams, double inv_p, std::span<double> grad) {
    for (size_t b = 0; b < nblocks; ++b) {
        const double* src = block_grads.data() + b * nparams;
        for (size_t k = 0; k < nparams; ++k) grad[k] += src[k];
    }
    double loss_sum = 0.0;
    for (size_t b = 0; b < nblocks; ++b) loss_sum += block_losses[b];
    return loss_sum * inv_p;
}

}  // namespace

double accumulate_gradients_serial(const ModelConfig& config, const ModelParams& params,
                                   std::span<const CompiledPatient> patients,
                                   std::span<const size_t> id_order,
                                   std::span<double> grad) {
    size_t nparams = params.layout.total;
    size_t nblocks = block_count(id_order.size());
    double inv_p = 1.0 / static_cast<double>(id_order.size());
    std::vector<double> block_grads(nblocks * nparams, 0.0);
    std::vector<double> block_losses(nblocks, 0.0);
    for (size_t b = 0; b < nblocks; ++b) {
        block_losses[b] = run_block(config, params, patients, id_order, b, inv_p,
                                    std::span<double>(block_grads.data() + b * nparams,
                                                      nparams));
    }
    return merge_blocks(block_grads, block_losses, nblocks, nparams, inv_p, grad);
}

double accumulate_gradients_parallel(const ModelConfig& config, const ModelParams& params,
                                     std::span<const CompiledPatient> patients,
                                     std::span<const size_t> id_order,
                                     std::span<double> grad) {
    size_t nparams = params.layout.total;
    size_t nblocks = block_count(id_order.size());
    double inv_p = 1.0 / static_cast<double>(id_order.size());
    std::vector<double> block_grads(nblocks * nparams, 0.0);
    std::vector<double> block_losses(nblocks, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
        block_losses[b] = run_block(config, params, patients, id_order,
                                    static_cast<size_t>(b), inv_p,
                                    std::span<double>(block_grads.data() + b * nparams,
                                                      nparams));
    }
    return merge_blocks(block_grads, block_losses, nblocks, nparams, inv_p, grad);
}

namespace {

void infer_one(const ModelConfig& config, const ModelParams& params,
               const CompiledPatient& patient, size_t row, size_t vocab_size,
               TauMap& tau, std::vector<PossibilityY>& outcomes,
               std::vector<double>* per_patient_loss) {
    ForwardTrace trace;
    forward(config, params, patient, /*full_tau=*/true, trace);
    std::copy(trace.tau_row.begin(), trace.tau_row.end(),
              tau.values.begin() + row * vocab_size);
    outcomes[row] = trace.output;
    if (per_patient_loss) (*per_patient_loss)[row] = loss(config, trace, patient);
}

void prepare_outputs(std::span<const CompiledPatient> patients, const VocabIndex& vocab,
                     TauMap& tau, std::vector<PossibilityY>& outcomes,
                     std::vector<double>* per_patient_loss) {
    tau.patient_ids.clear();
    for (const auto& p : patients) tau.patient_ids.push_back(p.id);
    tau.symbols = vocab.symbols;
    tau.values.assign(patients.size() * vocab.size(), 0.0);
    outcomes.assign(patients.size(), {});
    if (per_patient_loss) per_patient_loss->assign(patients.size(), 0.0);
}

}  // namespace

void infer_taumap_serial(const ModelConfig& config, const ModelParams& params,
                         std::span<const CompiledPatient> patients,
                         const VocabIndex& vocab, TauMap& tau,
                         std::vector<PossibilityY>& outcomes,
                         std::vector<double>* per_patient_loss) {
    prepare_outputs(patients, vocab, tau, outcomes, per_patient_loss);
    for (size_t i = 0; i < patients.size(); ++i)
        infer_one(config, params, patients[i], i, vocab.size(), tau, outcomes,
                  per_patient_loss);
}

void infer_taumap_parallel(const ModelConfig& config, const ModelParams& params,
                           std::span<const CompiledPatient> patients,
                           const VocabIndex& vocab, TauMap& tau,
                           std::vector<PossibilityY>& outcomes,
                           std::vector<double>* per_patient_loss) {
    prepare_outputs(patients, vocab, tau, outcomes, per_patient_loss);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(patients.size()); ++i)
        infer_one(config, params, patients[i], static_cast<size_t>(i), vocab.size(),
                  tau, outcomes, per_patient_loss);
}

TrainResult train(const ModelConfig& config, const Cohort& cohort) {
    auto bad = config.validate();
    if (!bad.empty()) throw std::invalid_argument("invalid ModelConfig: " + bad.front());
    if (cohort.patients.empty()) throw std::invalid_argument("empty cohort");

    VocabIndex vocab = VocabIndex::from(cohort.vocabulary);
    auto patients = compile_cohort(cohort, vocab);

    // gradient summation order: patient id ascending
    std::vector<size_t> id_order(patients.size());
    std::iota(id_order.begin(), id_order.end(), 0);
    std::sort(id_order.begin(), id_order.end(), [&](size_t a, size_t b) {
        return patients[a].id < patients[b].id;
    });

    TrainResult result;
    result.params = init_params(config, vocab);
    size_t nparams = result.params.layout.total;

    std::vector<double> grad(nparams), m(nparams, 0.0), vmom(nparams, 0.0);
    double b1t = 1.0, b2t = 1.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double epoch_loss = accumulate_gradients_parallel(config, result.params,
                                                          patients, id_order, grad);
        if (!std::isfinite(epoch_loss)) throw DivergedError(epoch, epoch_loss);
        result.loss_curve.push_back(epoch_loss);

        b1t *= config.adam_beta1;
        b2t *= config.adam_beta2;
        double* theta = result.params.values.data();
        for (size_t k = 0; k < nparams; ++k) {
            m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * grad[k];
            vmom[k] = config.adam_beta2 * vmom[k] + (1.0 - config.adam_beta2) * grad[k] * grad[k];
            double mhat = m[k] / (1.0 - b1t);
            double vhat = vmom[k] / (1.0 - b2t);
            theta[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
        }
    }

    std::vector<double> per_patient_loss;
    infer_taumap_parallel(config, result.params, patients, vocab, result.tau,
                          result.outcomes, &per_patient_loss);
    double loss_sum = 0.0;
    for (size_t i : id_order) loss_sum += per_patient_loss[i];
    result.final_loss = loss_sum / static_cast<double>(patients.size());
    if (!std::isfinite(result.final_loss))
        throw DivergedError(config.epochs, result.final_loss);
    return result;
}

}  // namespace tforge

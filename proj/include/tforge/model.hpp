#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tforge/types.hpp"

namespace tforge {

struct ModelConfig {
    int embed_dim = 16;
    int hidden_dim = 32;
    double attn_decay = 1.0;    // lambda: relative-timing bias on attention logits
    double order_margin = 0.1;  // m: margin of the order regularizer
    double beta_order = 1.0;
    double gamma_time = 0.5;
    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 300;
    uint64_t seed = 0;

    std::vector<std::string> validate() const;
};

// Flat parameter vector with named group offsets. Keeping everything in one
// buffer makes Adam, finite-difference checks, and serialization uniform.
struct ParamLayout {
    int vocab = 0, embed = 0, hidden = 0;
    size_t emb = 0;      // vocab x embed
    size_t enc_w = 0;    // embed
    size_t enc_b = 0;    // embed
    size_t q = 0;        // embed
    size_t w1 = 0;       // hidden x 2*embed, row-major
    size_t b1 = 0;       // hidden
    size_t w2 = 0;       // hidden
    size_t b2 = 0;       // 1
    size_t w_y = 0;      // embed
    size_t b_y = 0;      // 1
    size_t w_t = 0;      // embed
    size_t b_t = 0;      // 1
    size_t total = 0;

    static ParamLayout make(int vocab, int embed, int hidden);

    struct Group {
        std::string name;
        size_t offset;
        size_t len;
    };
    std::vector<Group> groups() const;
};

struct ModelParams {
    ParamLayout layout;
    std::vector<double> values;

    bool operator==(const ModelParams&) const = default;
};

// Deterministic init: weights ~ uniform(-1/sqrt(embed), +1/sqrt(embed)) drawn
// in layout order, biases zero.
ModelParams init_params(const ModelConfig& config, const VocabIndex& vocab);

// Patient pre-resolved against the vocabulary; events re-sorted canonically.
struct CompiledPatient {
    std::string id;
    std::vector<int> sym;        // vocabulary indices, in (day, symbol) order
    std::vector<double> day;     // raw days, same order
    std::vector<double> day_frac;  // day / window_days
    int label = 0;
    double onset_frac = 0.0;     // onset_day / window_days, positives only
    double window_days = 0.0;
};

CompiledPatient compile_patient(const PatientRecord& p, const VocabIndex& vocab);
std::vector<CompiledPatient> compile_cohort(const Cohort& cohort, const VocabIndex& vocab);

struct ForwardTrace {
    // outputs
    std::vector<double> attn;     // softmax weights over observed events
    std::vector<double> ctx;      // attended context vector
    std::vector<double> tau_row;  // tau(s) for the whole vocabulary (full mode)
    std::vector<double> tau_obs;  // tau(s_i) for the observed events, event order
    PossibilityY output;
    double y_logit = 0.0;
    // caches for backward
    std::vector<double> e;        // n x embed event representations
    std::vector<double> ctx0;     // pre-attention mean context
    std::vector<double> tau1;     // first-pass timings of observed events
    std::vector<double> h1;       // n x hidden, first-pass head activations
    std::vector<double> z;        // attention logits
    std::vector<double> h2;       // n x hidden, second-pass head activations (observed)
};

// Runs the two-pass computation. full_tau additionally evaluates the timing
// head for every vocabulary symbol (needed for TauMap rows; the loss only
// reads observed symbols).
void forward(const ModelConfig& config, const ModelParams& params,
             const CompiledPatient& patient, bool full_tau, ForwardTrace& trace);

ForwardTrace forward(const ModelConfig& config, const ModelParams& params,
                     const CompiledPatient& patient, bool full_tau = true);

double loss(const ModelConfig& config, const ForwardTrace& trace,
            const CompiledPatient& patient);

// Accumulates weight * dLoss/dparams into grad (size layout.total) and
// returns the loss. Gradients are analytic reverse-mode for the fixed
// architecture; see tests for the finite-difference oracle.
double backward(const ModelConfig& config, const ModelParams& params,
                const CompiledPatient& patient, double weight,
                std::span<double> grad);

}  // namespace tforge

#include "tforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tforge/numeric.hpp"
#include "tforge/rng.hpp"

namespace tforge {

std::vector<std::string> ModelConfig::validate() const {
    std::vector<std::string> out;
    if (embed_dim < 1) out.push_back("embed_dim must be >= 1");
    if (hidden_dim < 1) out.push_back("hidden_dim must be >= 1");
    if (attn_decay < 0.0) out.push_back("attn_decay must be non-negative");
    if (!(order_margin > 0.0)) out.push_back("order_margin must be positive");
    if (beta_order < 0.0) out.push_back("beta_order must be non-negative");
    if (gamma_time < 0.0) out.push_back("gamma_time must be non-negative");
    if (!(learning_rate > 0.0)) out.push_back("learning_rate must be positive");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) out.push_back("adam_beta1 out of [0,1)");
    if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) out.push_back("adam_beta2 out of [0,1)");
    if (!(adam_eps > 0.0)) out.push_back("adam_eps must be positive");
    if (epochs < 0) out.push_back("epochs must be non-negative");
    return out;
}

ParamLayout ParamLayout::make(int vocab, int embed, int hidden) {
    ParamLayout l;
    l.vocab = vocab;
    l.embed = embed;
    l.hidden = hidden;
    size_t off = 0;
    auto take = [&off](size_t n) {
        size_t at = off;
        off += n;
        return at;
    };
    size_t E = embed, H = hidden, V = vocab;
    l.emb = take(V * E);
    l.enc_w = take(E);
    l.enc_b = take(E);
    l.q = take(E);
    l.w1 = take(H * 2 * E);
    l.b1 = take(H);
    l.w2 = take(H);
    l.b2 = take(1);
    l.w_y = take(E);
    l.b_y = take(1);
    l.w_t = take(E);
    l.b_t = take(1);
    l.total = off;
    return l;
}

std::vector<ParamLayout::Group> ParamLayout::groups() const {
    size_t E = embed, H = hidden, V = vocab;
    return {
        {"emb", emb, V * E},   {"enc_w", enc_w, E}, {"enc_b", enc_b, E},
        {"q", q, E},           {"w1", w1, H * 2 * E}, {"b1", b1, H},
        {"w2", w2, H},         {"b2", b2, 1},       {"w_y", w_y, E},
        {"b_y", b_y, 1},       {"w_t", w_t, E},     {"b_t", b_t, 1},
    };
}

ModelParams init_params(const ModelConfig& config, const VocabIndex& vocab) {
    auto bad = config.validate();
    if (!bad.empty()) throw std::invalid_argument("invalid ModelConfig: " + bad.front());
    if (vocab.size() == 0) throw std::invalid_argument("empty vocabulary");

    ModelParams params;
    params.layout = ParamLayout::make(static_cast<int>(vocab.size()),
                                      config.embed_dim, config.hidden_dim);
    params.values.assign(params.layout.total, 0.0);

    Rng rng(config.seed);
    double bound = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
    auto fill = [&](size_t off, size_t len) {
        for (size_t i = 0; i < len; ++i)
            params.values[off + i] = rng.uniform(-bound, bound);
    };
    const auto& l = params.layout;
    size_t E = l.embed, H = l.hidden, V = l.vocab;
    // weights drawn in layout order; biases stay zero
    fill(l.emb, V * E);
    fill(l.enc_w, E);
    fill(l.q, E);
    fill(l.w1, H * 2 * E);
    fill(l.w2, H);
    fill(l.w_y, E);
    fill(l.w_t, E);
    return params;
}

CompiledPatient compile_patient(const PatientRecord& p, const VocabIndex& vocab) {
    CompiledPatient cp;
    cp.id = p.id;
    cp.label = p.label;
    cp.window_days = p.window_days;
    cp.onset_frac = (p.label == 1 && p.onset_day.has_value())
                        ? *p.onset_day / p.window_days
                        : 0.0;
    std::vector<const EventInstance*> evs;
    for (const auto& ev : p.events) evs.push_back(&ev);
    std::sort(evs.begin(), evs.end(), [](const EventInstance* a, const EventInstance* b) {
        if (a->day != b->day) return a->day < b->day;
        return a->symbol.render() < b->symbol.render();
    });
    for (const auto* ev : evs) {
        cp.sym.push_back(vocab.at(ev->symbol));
        cp.day.push_back(ev->day);
        cp.day_frac.push_back(ev->day / p.window_days);
    }
    return cp;
}

std::vector<CompiledPatient> compile_cohort(const Cohort& cohort, const VocabIndex& vocab) {
    std::vector<CompiledPatient> out;
    out.reserve(cohort.patients.size());
    for (const auto& p : cohort.patients) out.push_back(compile_patient(p, vocab));
    return out;
}

namespace {

// timing head: tau = w2 . tanh(W1 [emb_s ; c] + b1) + b2
double timing_head(const ParamLayout& l, const double* v, int sym,
                   const double* c, double* h_out) {
    size_t E = l.embed, H = l.hidden;
    const double* es = v + l.emb + static_cast<size_t>(sym) * E;
    const double* W1 = v + l.w1;
    double tau = v[l.b2];
    for (size_t r = 0; r < H; ++r) {
        const double* row = W1 + r * 2 * E;
        double pre = v[l.b1 + r];
        for (size_t k = 0; k < E; ++k) pre += row[k] * es[k];
        for (size_t k = 0; k < E; ++k) pre += row[E + k] * c[k];
        double h = std::tanh(pre);
        h_out[r] = h;
        tau += v[l.w2 + r] * h;
    }
    return tau;
}

// reverse of timing_head; writes weight-scaled leaf grads, accumulates the
// context half of the input gradient into g_c (unscaled)
void timing_head_backward(const ParamLayout& l, const double* v, int sym,
                          const double* c, const double* h, double dtau,
                          double weight, double* grad, double* g_c) {
    size_t E = l.embed, H = l.hidden;
    const double* es = v + l.emb + static_cast<size_t>(sym) * E;
    const double* W1 = v + l.w1;
    double* g_emb_s = grad + l.emb + static_cast<size_t>(sym) * E;
    for (size_t r = 0; r < H; ++r) {
        grad[l.w2 + r] += weight * dtau * h[r];
        double dpre = dtau * v[l.w2 + r] * (1.0 - h[r] * h[r]);
        const double* row = W1 + r * 2 * E;
        double* g_row = grad + l.w1 + r * 2 * E;
        for (size_t k = 0; k < E; ++k) {
            g_row[k] += weight * dpre * es[k];
            g_row[E + k] += weight * dpre * c[k];
            g_emb_s[k] += weight * dpre * row[k];
            g_c[k] += dpre * row[E + k];
        }
        grad[l.b1 + r] += weight * dpre;
    }
    grad[l.b2] += weight * dtau;
}

}  // namespace

void forward(const ModelConfig& config, const ModelParams& params,
             const CompiledPatient& patient, bool full_tau, ForwardTrace& trace) {
    const auto& l = params.layout;
    const double* v = params.values.data();
    size_t E = l.embed, H = l.hidden, V = l.vocab;
    size_t n = patient.sym.size();
    if (n == 0) throw std::invalid_argument("patient " + patient.id + " has no events");

    trace.e.assign(n * E, 0.0);
    trace.ctx0.assign(E, 0.0);
    trace.tau1.assign(n, 0.0);
    trace.h1.assign(n * H, 0.0);
    trace.z.assign(n, 0.0);
    trace.attn.assign(n, 0.0);
    trace.ctx.assign(E, 0.0);
    trace.h2.assign(n * H, 0.0);
    trace.tau_obs.assign(n, 0.0);
    trace.tau_row.clear();

    // (1) observed-event representations
    for (size_t i = 0; i < n; ++i) {
        const double* es = v + l.emb + static_cast<size_t>(patient.sym[i]) * E;
        double x = patient.day_frac[i];
        double* ei = trace.e.data() + i * E;
        for (size_t k = 0; k < E; ++k) ei[k] = es[k] + v[l.enc_w + k] * x + v[l.enc_b + k];
        for (size_t k = 0; k < E; ++k) trace.ctx0[k] += ei[k];
    }
    for (size_t k = 0; k < E; ++k) trace.ctx0[k] /= static_cast<double>(n);

    // first timing pass from the context-free mean
    double tau_bar = 0.0;
    for (size_t i = 0; i < n; ++i) {
        trace.tau1[i] = timing_head(l, v, patient.sym[i], trace.ctx0.data(),
                                    trace.h1.data() + i * H);
        tau_bar += trace.tau1[i];
    }
    tau_bar /= static_cast<double>(n);

    // (2) attention logits with relative-timing bias, (3) softmax + context
    double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(E));
    double zmax = -1e300;
    for (size_t i = 0; i < n; ++i) {
        const double* ei = trace.e.data() + i * E;
        double dot = 0.0;
        for (size_t k = 0; k < E; ++k) dot += v[l.q + k] * ei[k];
        trace.z[i] = dot * inv_sqrt_e -
                     config.attn_decay * std::abs(trace.tau1[i] - tau_bar);
        zmax = std::max(zmax, trace.z[i]);
    }
    double zsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        trace.attn[i] = std::exp(trace.z[i] - zmax);
        zsum += trace.attn[i];
    }
    for (size_t i = 0; i < n; ++i) {
        trace.attn[i] /= zsum;
        const double* ei = trace.e.data() + i * E;
        for (size_t k = 0; k < E; ++k) trace.ctx[k] += trace.attn[i] * ei[k];
    }

    // (4) timing head from the attended context: observed events always,
    // the rest of the vocabulary only when a full TauMap row is requested
    for (size_t i = 0; i < n; ++i) {
        trace.tau_obs[i] = timing_head(l, v, patient.sym[i], trace.ctx.data(),
                                       trace.h2.data() + i * H);
    }
    if (full_tau) {
        trace.tau_row.assign(V, 0.0);
        std::vector<bool> observed(V, false);
        for (size_t i = 0; i < n; ++i) {
            observed[patient.sym[i]] = true;
            trace.tau_row[patient.sym[i]] = trace.tau_obs[i];
        }
        std::vector<double> h_scratch(H);
        for (size_t s = 0; s < V; ++s) {
            if (observed[s]) continue;
            trace.tau_row[s] = timing_head(l, v, static_cast<int>(s),
                                           trace.ctx.data(), h_scratch.data());
        }
    }

    // (5) outcome possibility
    double zy = v[l.b_y], zt = v[l.b_t];
    for (size_t k = 0; k < E; ++k) {
        zy += v[l.w_y + k] * trace.ctx[k];
        zt += v[l.w_t + k] * trace.ctx[k];
    }
    trace.y_logit = zy;
    trace.output.p_positive = sigmoid(zy);
    trace.output.t_hat = zt;
}

ForwardTrace forward(const ModelConfig& config, const ModelParams& params,
                     const CompiledPatient& patient, bool full_tau) {
    ForwardTrace trace;
    forward(config, params, patient, full_tau, trace);
    return trace;
}

static double order_penalty(const ModelConfig& config, const CompiledPatient& patient,
                            const std::vector<double>& tau_obs) {
    size_t n = patient.sym.size();
    double sum = 0.0;
    int pairs = 0;
    for (size_t i = 0; i + 1 < n; ++i) {
        if (!(patient.day[i] < patient.day[i + 1])) continue;  // no order between ties
        sum += softplus(config.order_margin - (tau_obs[i + 1] - tau_obs[i]));
        ++pairs;
    }
    return pairs > 0 ? sum / pairs : 0.0;
}

double loss(const ModelConfig& config, const ForwardTrace& trace,
            const CompiledPatient& patient) {
    double L = bce_with_logit(trace.y_logit, patient.label);
    if (patient.label == 1)
        L += config.gamma_time * huber(trace.output.t_hat - patient.onset_frac);
    L += config.beta_order * order_penalty(config, patient, trace.tau_obs);
    return L;
}

double backward(const ModelConfig& config, const ModelParams& params,
                const CompiledPatient& patient, double weight,
                std::span<double> grad) {
    const auto& l = params.layout;
    if (grad.size() != l.total)
        throw std::invalid_argument("gradient buffer size mismatch");
    const double* v = params.values.data();
    size_t E = l.embed, H = l.hidden;
    size_t n = patient.sym.size();

    ForwardTrace t;
    forward(config, params, patient, /*full_tau=*/false, t);
    double L = loss(config, t, patient);

    // heads
    double dzy = t.output.p_positive - static_cast<double>(patient.label);
    double dzt = 0.0;
    if (patient.label == 1)
        dzt = config.gamma_time * huber_grad(t.output.t_hat - patient.onset_frac);

    std::vector<double> g_ctx(E, 0.0);
    for (size_t k = 0; k < E; ++k) {
        grad[l.w_y + k] += weight * dzy * t.ctx[k];
        grad[l.w_t + k] += weight * dzt * t.ctx[k];
        g_ctx[k] += dzy * v[l.w_y + k] + dzt * v[l.w_t + k];
    }
    grad[l.b_y] += weight * dzy;
    grad[l.b_t] += weight * dzt;

    // order regularizer -> second-pass taus
    std::vector<double> d_tau_obs(n, 0.0);
    {
        int pairs = 0;
        for (size_t i = 0; i + 1 < n; ++i)
            if (patient.day[i] < patient.day[i + 1]) ++pairs;
        if (pairs > 0) {
            double scale = config.beta_order / pairs;
            for (size_t i = 0; i + 1 < n; ++i) {
                if (!(patient.day[i] < patient.day[i + 1])) continue;
                double c = sigmoid(config.order_margin - (t.tau_obs[i + 1] - t.tau_obs[i]));
                d_tau_obs[i + 1] -= scale * c;
                d_tau_obs[i] += scale * c;
            }
        }
    }

    // second-pass timing head (observed events only; unobserved symbols have
    // no path into the loss)
    for (size_t i = 0; i < n; ++i) {
        if (d_tau_obs[i] == 0.0) continue;
        timing_head_backward(l, v, patient.sym[i], t.ctx.data(), t.h2.data() + i * H,
                             d_tau_obs[i], weight, grad.data(), g_ctx.data());
    }

    // attention: ctx = sum a_i e_i
    std::vector<double> g_e(n * E, 0.0);
    std::vector<double> g_a(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double* ei = t.e.data() + i * E;
        double* gei = g_e.data() + i * E;
        double dot = 0.0;
        for (size_t k = 0; k < E; ++k) {
            dot += g_ctx[k] * ei[k];
            gei[k] += t.attn[i] * g_ctx[k];
        }
        g_a[i] = dot;
    }
    double a_dot = 0.0;
    for (size_t i = 0; i < n; ++i) a_dot += t.attn[i] * g_a[i];
    std::vector<double> g_z(n, 0.0);
    for (size_t i = 0; i < n; ++i) g_z[i] = t.attn[i] * (g_a[i] - a_dot);

    // logits: z_i = (q . e_i)/sqrt(E) - lambda * |tau1_i - tau_bar|
    double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(E));
    double tau_bar = 0.0;
    for (size_t i = 0; i < n; ++i) tau_bar += t.tau1[i];
    tau_bar /= static_cast<double>(n);
    double sgn_dot = 0.0;
    std::vector<double> sgn(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        sgn[i] = sign(t.tau1[i] - tau_bar);
        sgn_dot += g_z[i] * sgn[i];
        const double* ei = t.e.data() + i * E;
        double* gei = g_e.data() + i * E;
        for (size_t k = 0; k < E; ++k) {
            grad[l.q + k] += weight * g_z[i] * ei[k] * inv_sqrt_e;
            gei[k] += g_z[i] * v[l.q + k] * inv_sqrt_e;
        }
    }
    std::vector<double> g_ctx0(E, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double d_tau1 = -config.attn_decay *
                        (g_z[i] * sgn[i] - sgn_dot / static_cast<double>(n));
        if (d_tau1 == 0.0) continue;
        timing_head_backward(l, v, patient.sym[i], t.ctx0.data(), t.h1.data() + i * H,
                             d_tau1, weight, grad.data(), g_ctx0.data());
    }

    // ctx0 = mean e_i
    for (size_t i = 0; i < n; ++i) {
        double* gei = g_e.data() + i * E;
        for (size_t k = 0; k < E; ++k) gei[k] += g_ctx0[k] / static_cast<double>(n);
    }

    // e_i = emb[s_i] + enc_w * x_i + enc_b
    for (size_t i = 0; i < n; ++i) {
        const double* gei = g_e.data() + i * E;
        double* g_emb_s = grad.data() + l.emb + static_cast<size_t>(patient.sym[i]) * E;
        double x = patient.day_frac[i];
        for (size_t k = 0; k < E; ++k) {
            g_emb_s[k] += weight * gei[k];
            grad[l.enc_w + k] += weight * gei[k] * x;
            grad[l.enc_b + k] += weight * gei[k];
        }
    }

    return L;
}

}  // namespace tforge

#include "tforge/counterfactual.hpp"

#include <algorithm>
#include <cmath>

#include "tforge/attention.hpp"
#include "tforge/numeric.hpp"
#include "tforge/stats.hpp"

namespace tforge {

std::vector<std::string> CfConfig::validate() const {
    std::vector<std::string> out;
    if (!(step_size > 0.0)) out.push_back("step_size must be positive");
    if (max_iters < 1) out.push_back("max_iters must be >= 1");
    if (!(target_p > 0.0) || target_p > 0.5) out.push_back("target_p must lie in (0, 0.5]");
    if (mu < 0.0) out.push_back("mu must be non-negative");
    return out;
}

std::set<std::string> select_cohort(const RunRecord& run, const Cohort& cohort,
                                    const std::vector<EventSymbol>& trajectory_filter) {
    std::set<std::string> known(run.tau.patient_ids.begin(), run.tau.patient_ids.end());
    std::set<std::string> out;
    for (const auto& p : cohort.patients) {
        if (p.label != 1 || !known.count(p.id)) continue;
        size_t next = 0;
        for (const auto& ev : p.events) {
            if (next < trajectory_filter.size() && ev.symbol == trajectory_filter[next])
                ++next;
        }
        if (next == trajectory_filter.size()) out.insert(p.id);
    }
    return out;
}

namespace {

// attention + outcome head with tau values injected in place of the timing
// head; everything else is frozen
struct CfForward {
    const ModelConfig& config;
    const ModelParams& params;
    const CompiledPatient& patient;
    std::vector<double> e;      // n x E event representations
    std::vector<double> q_dot;  // (q . e_i)/sqrt(E)
    size_t n, E;

    CfForward(const ModelConfig& cfg, const ModelParams& prm, const CompiledPatient& pat)
        : config(cfg), params(prm), patient(pat) {
        const auto& l = params.layout;
        const double* v = params.values.data();
        n = patient.sym.size();
        E = l.embed;
        e.assign(n * E, 0.0);
        q_dot.assign(n, 0.0);
        double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(E));
        for (size_t i = 0; i < n; ++i) {
            const double* es = v + l.emb + static_cast<size_t>(patient.sym[i]) * E;
            double x = patient.day_frac[i];
            double* ei = e.data() + i * E;
            double dot = 0.0;
            for (size_t k = 0; k < E; ++k) {
                ei[k] = es[k] + v[l.enc_w + k] * x + v[l.enc_b + k];
                dot += v[l.q + k] * ei[k];
            }
            q_dot[i] = dot * inv_sqrt_e;
        }
    }

    // p_positive given the current tau assignment; caches for the gradient
    struct Eval {
        std::vector<double> attn;
        std::vector<double> tau_obs;
        double tau_bar = 0.0;
        double y_logit = 0.0;
        double p = 0.0;
    };

    Eval eval(std::span<const double> tau) const {
        const auto& l = params.layout;
        const double* v = params.values.data();
        Eval ev;
        ev.tau_obs.resize(n);
        for (size_t i = 0; i < n; ++i) ev.tau_obs[i] = tau[patient.sym[i]];
        for (double t : ev.tau_obs) ev.tau_bar += t;
        ev.tau_bar /= static_cast<double>(n);

        std::vector<double> z(n);
        double zmax = -1e300;
        for (size_t i = 0; i < n; ++i) {
            z[i] = q_dot[i] - config.attn_decay * std::abs(ev.tau_obs[i] - ev.tau_bar);
            zmax = std::max(zmax, z[i]);
        }
        ev.attn.resize(n);
        double zsum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            ev.attn[i] = std::exp(z[i] - zmax);
            zsum += ev.attn[i];
        }
        double zy = v[l.b_y];
        for (size_t i = 0; i < n; ++i) {
            ev.attn[i] /= zsum;
            const double* ei = e.data() + i * E;
            double ctx_dot = 0.0;
            for (size_t k = 0; k < E; ++k) ctx_dot += v[l.w_y + k] * ei[k];
            zy += ev.attn[i] * ctx_dot;
        }
        ev.y_logit = zy;
        ev.p = sigmoid(zy);
        return ev;
    }

    // gradient of BCE(p, 0) w.r.t. the injected taus (free entries only)
    void grad(const Eval& ev, const std::vector<bool>& free_mask,
              std::span<double> g_tau) const {
        const auto& l = params.layout;
        const double* v = params.values.data();
        std::vector<double> g_a(n);
        double a_dot = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double* ei = e.data() + i * E;
            double ctx_dot = 0.0;
            for (size_t k = 0; k < E; ++k) ctx_dot += v[l.w_y + k] * ei[k];
            g_a[i] = ev.p * ctx_dot;  // dBCE/dzy = p for asserted label 0
            a_dot += ev.attn[i] * g_a[i];
        }
        std::vector<double> g_z(n);
        double sgn_dot = 0.0;
        std::vector<double> sgn(n);
        for (size_t i = 0; i < n; ++i) {
            g_z[i] = ev.attn[i] * (g_a[i] - a_dot);
            sgn[i] = sign(ev.tau_obs[i] - ev.tau_bar);
            sgn_dot += g_z[i] * sgn[i];
        }
        for (size_t i = 0; i < n; ++i) {
            double d = -config.attn_decay *
                       (g_z[i] * sgn[i] - sgn_dot / static_cast<double>(n));
            if (free_mask[patient.sym[i]]) g_tau[patient.sym[i]] += d;
        }
    }
};

}  // namespace

CfPatientResult deduce(const ModelConfig& model_config, const ModelParams& params,
                       const CompiledPatient& patient, std::span<const double> tau0,
                       const std::vector<bool>& free_mask, const CfConfig& cf) {
    auto bad = cf.validate();
    if (!bad.empty()) throw std::invalid_argument("invalid CfConfig: " + bad.front());
    size_t V = params.layout.vocab;
    if (tau0.size() != V || free_mask.size() != V)
        throw std::invalid_argument("tau row / free mask size mismatch");

    CfPatientResult res;
    res.id = patient.id;
    res.tau_original.assign(tau0.begin(), tau0.end());
    res.tau_cf = res.tau_original;

    CfForward fwd(model_config, params, patient);
    auto objective = [&](std::span<const double> tau, const CfForward::Eval& ev) {
        double obj = softplus(ev.y_logit);  // BCE against asserted label 0
        for (size_t s = 0; s < V; ++s) {
            if (!free_mask[s]) continue;
            double d = tau[s] - tau0[s];
            obj += cf.mu * d * d;
        }
        return obj;
    };

    CfForward::Eval ev = fwd.eval(res.tau_cf);
    res.final_p = ev.p;
    if (ev.p <= cf.target_p) {
        res.converged = true;  // nothing to deduce
        return res;
    }

    double obj = objective(res.tau_cf, ev);
    double step = cf.step_size;
    std::vector<double> g(V), candidate(V);
    for (int iter = 1; iter <= cf.max_iters; ++iter) {
        std::fill(g.begin(), g.end(), 0.0);
        fwd.grad(ev, free_mask, g);
        for (size_t s = 0; s < V; ++s)
            if (free_mask[s]) g[s] += 2.0 * cf.mu * (res.tau_cf[s] - tau0[s]);

        bool accepted = false;
        CfForward::Eval ev_new;
        double obj_new = 0.0;
        while (res.step_halvings < 60) {
            candidate = res.tau_cf;
            for (size_t s = 0; s < V; ++s)
                if (free_mask[s]) candidate[s] -= step * g[s];
            ev_new = fwd.eval(candidate);
            obj_new = objective(candidate, ev_new);
            if (!std::isfinite(obj_new)) {
                res.aborted = true;
                return res;
            }
            if (obj_new <= obj) {
                accepted = true;
                break;
            }
            step *= 0.5;  // kept for the rest of this patient's descent
            ++res.step_halvings;
        }
        if (!accepted) break;  // no descent direction at floating-point scale

        res.tau_cf = candidate;
        obj = obj_new;
        ev = ev_new;
        res.iterations = iter;
        res.final_p = ev.p;
        if (ev.p <= cf.target_p) {
            res.converged = true;
            break;
        }
    }
    return res;
}

double relative_window_end(std::span<const double> tau0, const std::vector<bool>& observed) {
    std::vector<double> obs;
    for (size_t s = 0; s < tau0.size(); ++s)
        if (observed[s]) obs.push_back(tau0[s]);
    if (obs.empty())
        throw std::invalid_argument("relative_window_end: no observed symbols");
    std::sort(obs.begin(), obs.end());
    double gap = 1.0;  // declared fallback for single-event patients
    if (obs.size() > 1) {
        double sum = 0.0;
        for (size_t i = 1; i < obs.size(); ++i) sum += obs[i] - obs[i - 1];
        gap = sum / static_cast<double>(obs.size() - 1);
    }
    return obs.back() + gap;
}

void classify_disposition(CfPatientResult& entry, const std::vector<bool>& observed,
                          const std::vector<bool>& free_mask,
                          const std::vector<EventSymbol>& symbols,
                          std::optional<double> shift_eps) {
    double eps = shift_eps.has_value()
                     ? *shift_eps
                     : 0.05 * iqr(entry.tau_original);
    double tau_end = relative_window_end(entry.tau_original, observed);
    entry.dispositions.clear();
    for (size_t s = 0; s < symbols.size(); ++s) {
        if (!free_mask[s]) continue;
        double d = entry.tau_cf[s] - entry.tau_original[s];
        std::string verdict;
        if (std::abs(d) <= eps)
            verdict = "unchanged";
        else if (d > eps && entry.tau_cf[s] > tau_end)
            verdict = "canceled";  // postponed beyond the relative window end
        else if (d > eps)
            verdict = "postponed";
        else
            verdict = "advanced";
        entry.dispositions[symbols[s].render()] = verdict;
    }
}

namespace {

CfResult cf_batch_impl(const RunRecord& run, const Cohort& cohort,
                       const std::set<std::string>& selected, const CfConfig& cf,
                       std::optional<double> shift_eps, bool parallel) {
    CfResult result;
    result.config = cf;
    result.symbols = run.tau.symbols;
    VocabIndex vocab = VocabIndex::from(run.tau.symbols);
    size_t V = vocab.size();

    std::vector<bool> free_mask(V, true);
    if (cf.symbols_free.has_value()) {
        free_mask.assign(V, false);
        for (const auto& s : cf.symbols_free.value()) free_mask[vocab.at(s)] = true;
    }

    struct Job {
        CompiledPatient patient;
        std::vector<bool> observed;
        size_t tau_row;
    };
    std::vector<Job> jobs;
    for (const auto& p : cohort.patients) {
        if (!selected.count(p.id)) continue;
        int row = run.tau.patient_index(p.id);
        if (row < 0) throw std::invalid_argument("selected patient not in run: " + p.id);
        Job job;
        job.patient = compile_patient(p, vocab);
        job.observed.assign(V, false);
        for (int s : job.patient.sym) job.observed[s] = true;
        job.tau_row = static_cast<size_t>(row);
        jobs.push_back(std::move(job));
    }
    std::sort(jobs.begin(), jobs.end(),
              [](const Job& a, const Job& b) { return a.patient.id < b.patient.id; });

    result.patients.resize(jobs.size());
    auto run_job = [&](size_t i) {
        const Job& job = jobs[i];
        std::span<const double> tau0(run.tau.values.data() + job.tau_row * V, V);
        CfPatientResult entry =
            deduce(run.config, run.params, job.patient, tau0, free_mask, cf);
        classify_disposition(entry, job.observed, free_mask, result.symbols, shift_eps);
        result.patients[i] = std::move(entry);
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(jobs.size()); ++i)
            run_job(static_cast<size_t>(i));
    } else {
        for (size_t i = 0; i < jobs.size(); ++i) run_job(i);
    }
    return result;
}

}  // namespace

CfResult cf_batch_serial(const RunRecord& run, const Cohort& cohort,
                         const std::set<std::string>& selected, const CfConfig& cf,
                         std::optional<double> shift_eps) {
    return cf_batch_impl(run, cohort, selected, cf, shift_eps, false);
}

CfResult cf_batch_parallel(const RunRecord& run, const Cohort& cohort,
                           const std::set<std::string>& selected, const CfConfig& cf,
                           std::optional<double> shift_eps) {
    return cf_batch_impl(run, cohort, selected, cf, shift_eps, true);
}

KdeResult kde(std::span<const double> samples, std::optional<double> bandwidth,
              int grid_points) {
    if (samples.size() < 2)
        throw DegenerateSampleError("kde requires at least 2 samples");
    if (grid_points < 2) throw std::invalid_argument("kde grid needs >= 2 points");

    size_t n = samples.size();
    double h;
    if (bandwidth.has_value()) {
        h = *bandwidth;
    } else {
        std::vector<double> xs(samples.begin(), samples.end());
        double m = mean(samples);
        double ss = 0.0;
        for (double x : samples) ss += (x - m) * (x - m);
        double sd = std::sqrt(ss / static_cast<double>(n - 1));
        h = 0.9 * std::min(sd, iqr(xs) / 1.34) *
            std::pow(static_cast<double>(n), -0.2);
    }
    if (!(h > 0.0))
        throw DegenerateSampleError("kde bandwidth is zero (degenerate sample)");

    auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn_it - 3.0 * h, hi = *mx_it + 3.0 * h;

    KdeResult out;
    out.bandwidth = h;
    out.grid.resize(grid_points);
    out.density.resize(grid_points);
    double dx = (hi - lo) / static_cast<double>(grid_points - 1);
    double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
    for (int g = 0; g < grid_points; ++g) {
        double x = lo + dx * g;
        double dsum = 0.0;
        for (double xi : samples) {
            double u = (x - xi) / h;
            dsum += std::exp(-0.5 * u * u);
        }
        out.grid[g] = x;
        out.density[g] = norm * dsum;
    }
    return out;
}

}  // namespace tforge

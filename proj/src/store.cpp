#include "tforge/store.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "tforge/cohort_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tforge {

static json config_json(const ModelConfig& c) {
    return json{{"embed_dim", c.embed_dim},
                {"hidden_dim", c.hidden_dim},
                {"attn_decay", c.attn_decay},
                {"order_margin", c.order_margin},
                {"beta_order", c.beta_order},
                {"gamma_time", c.gamma_time},
                {"learning_rate", c.learning_rate},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"epochs", c.epochs},
                {"seed", c.seed}};
}

static ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.attn_decay = j.value("attn_decay", c.attn_decay);
    c.order_margin = j.value("order_margin", c.order_margin);
    c.beta_order = j.value("beta_order", c.beta_order);
    c.gamma_time = j.value("gamma_time", c.gamma_time);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::string model_config_to_json(const ModelConfig& config) {
    return config_json(config).dump();
}

ModelConfig parse_model_config(const std::string& text) {
    return config_from_json(json::parse(text));
}

std::string config_sha256(const ModelConfig& config) {
    ModelConfig c = config;
    c.seed = 0;
    return sha256_hex(model_config_to_json(c));
}

std::string run_record_to_json(const RunRecord& run) {
    json symbols = json::array();
    for (const auto& s : run.tau.symbols) symbols.push_back(s.render());
    json outcomes = json::array();
    for (const auto& o : run.outcomes)
        outcomes.push_back({{"p_positive", o.p_positive}, {"t_hat", o.t_hat}});
    json tau_rows = json::array();
    size_t v = run.tau.symbols.size();
    for (size_t p = 0; p < run.tau.patient_ids.size(); ++p) {
        json row = json::array();
        for (size_t s = 0; s < v; ++s) row.push_back(run.tau.at(p, s));
        tau_rows.push_back(std::move(row));
    }
    json j{{"run_id", run.run_id},
           {"seed", run.seed},
           {"config", config_json(run.config)},
           {"cohort_sha256", run.cohort_sha256},
           {"final_loss", run.final_loss},
           {"loss_curve", run.loss_curve},
           {"patients", run.tau.patient_ids},
           {"symbols", std::move(symbols)},
           {"tau", std::move(tau_rows)},
           {"outcomes", std::move(outcomes)},
           {"params",
            {{"vocab", run.params.layout.vocab},
             {"embed", run.params.layout.embed},
             {"hidden", run.params.layout.hidden},
             {"values", run.params.values}}}};
    return j.dump();
}

RunRecord parse_run_record(const std::string& text) {
    json j = json::parse(text);
    RunRecord run;
    run.run_id = j.at("run_id").get<int>();
    run.seed = j.at("seed").get<uint64_t>();
    run.config = config_from_json(j.at("config"));
    run.cohort_sha256 = j.at("cohort_sha256").get<std::string>();
    run.final_loss = j.at("final_loss").get<double>();
    run.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    run.tau.patient_ids = j.at("patients").get<std::vector<std::string>>();
    for (const auto& s : j.at("symbols"))
        run.tau.symbols.push_back(parse_symbol(s.get<std::string>()));
    for (const auto& row : j.at("tau"))
        for (const auto& x : row) run.tau.values.push_back(x.get<double>());
    for (const auto& o : j.at("outcomes"))
        run.outcomes.push_back(
            {o.at("p_positive").get<double>(), o.at("t_hat").get<double>()});
    const auto& pj = j.at("params");
    run.params.layout = ParamLayout::make(pj.at("vocab").get<int>(),
                                          pj.at("embed").get<int>(),
                                          pj.at("hidden").get<int>());
    run.params.values = pj.at("values").get<std::vector<double>>();
    if (run.params.values.size() != run.params.layout.total)
        throw std::runtime_error("run artifact: parameter count mismatch");
    return run;
}

static std::string manifest_to_json(const StoreManifest& m) {
    return json{{"cohort_sha256", m.cohort_sha256},
                {"config_sha256", m.config_sha256},
                {"k", m.k},
                {"base_seed", m.base_seed}}
        .dump();
}

static StoreManifest parse_manifest(const std::string& text) {
    json j = json::parse(text);
    StoreManifest m;
    m.cohort_sha256 = j.at("cohort_sha256").get<std::string>();
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    m.k = j.at("k").get<int>();
    m.base_seed = j.at("base_seed").get<uint64_t>();
    return m;
}

static std::string run_path(const std::string& dir, int k) {
    return dir + "/run_" + std::to_string(k) + ".json";
}

EnsembleOutcome run_ensemble(const ModelConfig& config, const Cohort& cohort, int k,
                             uint64_t base_seed, const std::string& dir) {
    if (k < 1) throw std::invalid_argument("ensemble size K must be >= 1");
    auto bad = config.validate();
    if (!bad.empty()) throw std::invalid_argument("invalid ModelConfig: " + bad.front());

    std::string cohort_hash = cohort_sha256(cohort);
    std::string cfg_hash = config_sha256(config);

    fs::create_directories(dir);
    std::string manifest_path = dir + "/manifest.json";
    StoreManifest manifest{cohort_hash, cfg_hash, k, base_seed};
    if (fs::exists(manifest_path)) {
        StoreManifest old = parse_manifest(read_file(manifest_path));
        if (old.cohort_sha256 != cohort_hash)
            throw StoreIntegrityError("store cohort hash mismatch: store has " +
                                      old.cohort_sha256 + ", input is " + cohort_hash);
        if (old.config_sha256 != cfg_hash)
            throw StoreIntegrityError("store config hash mismatch: store has " +
                                      old.config_sha256 + ", input is " + cfg_hash);
        if (old.base_seed != base_seed)
            throw StoreIntegrityError(
                "store base_seed mismatch: store has " + std::to_string(old.base_seed) +
                ", requested " + std::to_string(base_seed));
        manifest.k = std::max(old.k, k);
    }
    write_file(manifest_path, manifest_to_json(manifest));

    EnsembleOutcome out;
    out.store.dir = dir;
    out.store.manifest = manifest;
    for (int i = 0; i < k; ++i) {
        std::string path = run_path(dir, i);
        if (fs::exists(path)) {
            out.store.runs.push_back(parse_run_record(read_file(path)));
            continue;
        }
        ModelConfig run_config = config;
        run_config.seed = base_seed + static_cast<uint64_t>(i);
        try {
            TrainResult trained = train(run_config, cohort);
            RunRecord run;
            run.run_id = i;
            run.seed = run_config.seed;
            run.config = run_config;
            run.cohort_sha256 = cohort_hash;
            run.final_loss = trained.final_loss;
            run.loss_curve = std::move(trained.loss_curve);
            run.tau = std::move(trained.tau);
            run.outcomes = std::move(trained.outcomes);
            run.params = std::move(trained.params);
            write_file(path, run_record_to_json(run));
            out.store.runs.push_back(std::move(run));
            ++out.trained;
        } catch (const DivergedError& e) {
            out.diverged.emplace_back(i, e.epoch);
        }
    }
    return out;
}

PossibilityStore load_store(const std::string& dir) {
    PossibilityStore store;
    store.dir = dir;
    std::string manifest_path = dir + "/manifest.json";
    if (!fs::exists(manifest_path))
        throw std::runtime_error("no store manifest at " + manifest_path);
    store.manifest = parse_manifest(read_file(manifest_path));
    for (int i = 0; i < store.manifest.k; ++i) {
        std::string path = run_path(dir, i);
        if (fs::exists(path)) store.runs.push_back(parse_run_record(read_file(path)));
    }
    return store;
}

static int require_patient(const PossibilityStore& store, const std::string& id) {
    if (store.runs.empty()) throw std::invalid_argument("store has no runs");
    int idx = store.runs.front().tau.patient_index(id);
    if (idx < 0) throw std::out_of_range("unknown patient id: " + id);
    return idx;
}

OutcomeDistribution outcome_distribution(const PossibilityStore& store,
                                         const std::string& patient_id) {
    int idx = require_patient(store, patient_id);
    OutcomeDistribution dist;
    for (const auto& run : store.runs) dist.samples.push_back(run.outcomes[idx]);
    double n = static_cast<double>(dist.samples.size());
    double mp = 0.0, mt = 0.0;
    for (const auto& s : dist.samples) {
        mp += s.p_positive;
        mt += s.t_hat;
    }
    mp /= n;
    mt /= n;
    double vp = 0.0, vt = 0.0;
    for (const auto& s : dist.samples) {
        vp += (s.p_positive - mp) * (s.p_positive - mp);
        vt += (s.t_hat - mt) * (s.t_hat - mt);
    }
    dist.mean = {mp, mt};
    dist.stddev = {std::sqrt(vp / n), std::sqrt(vt / n)};
    return dist;
}

double across_possibility_compare(const PossibilityStore& store, const EventSymbol& symbol,
                                  const std::string& patient_a,
                                  const std::string& patient_b) {
    int ia = require_patient(store, patient_a);
    int ib = require_patient(store, patient_b);
    double score = 0.0;
    for (const auto& run : store.runs) {
        VocabIndex vocab = VocabIndex::from(run.tau.symbols);
        int s = vocab.at(symbol);
        double ta = run.tau.at(ia, s), tb = run.tau.at(ib, s);
        if (ta < tb)
            score += 1.0;
        else if (ta == tb)
            score += 0.5;
    }
    return score / static_cast<double>(store.runs.size());
}

double survival_style_onset_compare(const PossibilityStore& store,
                                    const std::string& patient_a,
                                    const std::string& patient_b) {
    int ia = require_patient(store, patient_a);
    int ib = require_patient(store, patient_b);
    double score = 0.0;
    for (const auto& run : store.runs) {
        double ta = run.outcomes[ia].t_hat, tb = run.outcomes[ib].t_hat;
        if (ta > tb)
            score += 1.0;
        else if (ta == tb)
            score += 0.5;
    }
    return score / static_cast<double>(store.runs.size());
}

}  // namespace tforge

#include "tforge/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace tforge {

namespace {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct PathEnumerator {
    const std::vector<std::vector<int>>& adj;
    const std::vector<bool>& is_sink;
    size_t max_paths;
    std::vector<std::vector<int>> paths;
    bool truncated = false;
    std::vector<int> current;

    void dfs(int node) {
        if (truncated) return;
        current.push_back(node);
        if (is_sink[node]) {
            if (paths.size() >= max_paths) {
                truncated = true;
            } else {
                paths.push_back(current);
            }
        } else {
            for (int next : adj[node]) {
                dfs(next);
                if (truncated) break;
            }
        }
        current.pop_back();
    }
};

}  // namespace

PathwayExtraction extract_pathways(const RunRecord& run, const Cohort& cohort,
                                   const MinerParams& params) {
    if (params.kappa_min <= 0.0 || params.min_support <= 0)
        throw std::invalid_argument("miner params must be positive");
    if (params.jaccard_min <= 0.0 || params.jaccard_min > 1.0)
        throw std::invalid_argument("jaccard_min must lie in (0, 1]");

    AttentionRanking ranking = rank_by_attention(run, cohort, nullptr, params.c_mad);

    // qualifying symbols in canonical order
    std::vector<TimingAttentionStat> nodes;
    for (const auto& stat : ranking.stats)
        if (stat.kappa >= params.kappa_min && stat.c_m >= params.min_support)
            nodes.push_back(stat);
    std::sort(nodes.begin(), nodes.end(),
              [](const TimingAttentionStat& a, const TimingAttentionStat& b) {
                  return SymbolLess{}(a.symbol, b.symbol);
              });

    size_t n = nodes.size();
    std::vector<std::vector<int>> adj(n);
    std::vector<int> indeg(n, 0);
    std::vector<bool> is_sink(n, true);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (!(nodes[i].mean_tau < nodes[j].mean_tau)) continue;
            if (jaccard(nodes[i].core_candidates, nodes[j].core_candidates) <
                params.jaccard_min)
                continue;
            adj[i].push_back(static_cast<int>(j));
            ++indeg[j];
            is_sink[i] = false;
        }
    }

    PathEnumerator en{adj, is_sink, params.max_paths};
    for (size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) en.dfs(static_cast<int>(i));

    PathwayExtraction out;
    out.truncated = en.truncated;
    for (const auto& path : en.paths) {
        Pathway pw;
        std::set<std::string> running;
        const std::set<std::string>* restrict = nullptr;  // step 1 = full cohort
        double prev_mean = 0.0;
        bool ok = true;
        for (size_t k = 0; k < path.size(); ++k) {
            const EventSymbol& symbol = nodes[path[k]].symbol;
            TimingAttentionStat stat;
            try {
                stat = attention_stat(run, symbol, cohort, restrict, params.c_mad);
            } catch (const DegenerateSampleError&) {
                ok = false;
                break;
            }
            if (stat.c_m < params.min_support) {
                ok = false;
                break;
            }
            if (k > 0 && !(stat.mean_tau > prev_mean)) {
                // restriction reordered the means; no longer a forward chain
                ok = false;
                break;
            }
            prev_mean = stat.mean_tau;
            running = stat.core_candidates;
            restrict = &running;
            pw.steps.push_back({symbol, std::move(stat)});
        }
        if (!ok) continue;
        pw.running_cohort = running;
        out.pathways.push_back(std::move(pw));
    }
    return out;
}

std::vector<TrajectoryCluster> cluster_pathways(const std::vector<Pathway>& pathways) {
    std::map<std::string, TrajectoryCluster> by_terminal;
    for (const auto& pw : pathways) {
        if (pw.steps.empty()) continue;
        const EventSymbol& terminal = pw.steps.back().symbol;
        auto& cluster = by_terminal[terminal.render()];
        cluster.terminal = terminal;
        cluster.total_support += pw.running_cohort.size();
        cluster.pathways.push_back(pw);
    }
    std::vector<TrajectoryCluster> out;
    for (auto& [_, cluster] : by_terminal) {
        std::sort(cluster.pathways.begin(), cluster.pathways.end(),
                  [](const Pathway& a, const Pathway& b) {
                      if (a.running_cohort.size() != b.running_cohort.size())
                          return a.running_cohort.size() > b.running_cohort.size();
                      auto key = [](const Pathway& p) {
                          std::string k;
                          for (const auto& s : p.steps) k += s.symbol.render() + "|";
                          return k;
                      };
                      return key(a) < key(b);
                  });
        out.push_back(std::move(cluster));
    }
    std::sort(out.begin(), out.end(),
              [](const TrajectoryCluster& a, const TrajectoryCluster& b) {
                  if (a.total_support != b.total_support)
                      return a.total_support > b.total_support;
                  return SymbolLess{}(a.terminal, b.terminal);
              });
    return out;
}

StepProfile step_profile(const Pathway& pathway) {
    StepProfile profile;
    for (const auto& step : pathway.steps)
        profile.rows.push_back({step.symbol, step.stat.kappa, step.stat.c_m,
                                step.stat.c_t, step.stat.p_pos});

    constexpr double dead_band = 0.02;
    bool any_up = false, any_down = false;
    int first_sign = 0;
    for (size_t i = 0; i + 1 < profile.rows.size(); ++i) {
        double d = profile.rows[i + 1].p_pos - profile.rows[i].p_pos;
        int s = d > dead_band ? 1 : (d < -dead_band ? -1 : 0);
        if (s == 1) any_up = true;
        if (s == -1) any_down = true;
        if (first_sign == 0) first_sign = s;
    }
    if (!any_up && !any_down)
        profile.trend = "flat";
    else if (any_up && !any_down)
        profile.trend = "increasing";
    else if (any_down && !any_up)
        profile.trend = "decreasing";
    else if (first_sign == 1)
        profile.trend = "peaked";  // rises before it first declines
    else
        profile.trend = "mixed";
    return profile;
}

std::string dot_export(const std::vector<TrajectoryCluster>& clusters) {
    std::string out;
    for (size_t c = 0; c < clusters.size(); ++c) {
        out += "digraph cluster_" + std::to_string(c) + " {\n";
        // shared symbols (terminals in particular) are rendered once; the
        // label carries the stat from the first pathway that visits them
        std::vector<std::string> node_order;
        std::map<std::string, const TimingAttentionStat*> node_stat;
        std::set<std::pair<std::string, std::string>> edges;
        for (const auto& pw : clusters[c].pathways) {
            for (size_t k = 0; k < pw.steps.size(); ++k) {
                std::string name = pw.steps[k].symbol.render();
                if (!node_stat.count(name)) {
                    node_stat[name] = &pw.steps[k].stat;
                    node_order.push_back(name);
                }
                if (k > 0)
                    edges.insert({pw.steps[k - 1].symbol.render(), name});
            }
        }
        for (const auto& name : node_order) {
            const auto* stat = node_stat[name];
            char label[160];
            std::snprintf(label, sizeof(label),
                          "%s\\nκ=%.2f C_M=%d C_T=%d P+=%.2f", name.c_str(),
                          stat->kappa, stat->c_m, stat->c_t, stat->p_pos);
            out += "  \"" + name + "\" [label=\"" + label + "\"];\n";
        }
        for (const auto& [from, to] : edges)
            out += "  \"" + from + "\" -> \"" + to + "\";\n";
        out += "}\n";
    }
    return out;
}

}  // namespace tforge

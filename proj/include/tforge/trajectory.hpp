#pragma once

#include <set>
#include <string>
#include <vector>

#include "tforge/attention.hpp"
#include "tforge/store.hpp"
#include "tforge/types.hpp"

namespace tforge {

struct MinerParams {
    double kappa_min = 2.0;
    int min_support = 20;
    double jaccard_min = 0.5;
    double c_mad = 3.0;
    size_t max_paths = 10000;  // maximal-path enumeration cap
};

struct TrajectoryStep {
    EventSymbol symbol;
    TimingAttentionStat stat;  // computed on the running cohort at this step
};

struct Pathway {
    std::vector<TrajectoryStep> steps;
    std::set<std::string> running_cohort;  // intersection of core sets along the steps
};

struct TrajectoryCluster {
    EventSymbol terminal;
    std::vector<Pathway> pathways;
    size_t total_support = 0;  // sum of pathway running-cohort sizes
};

struct PathwayExtraction {
    std::vector<Pathway> pathways;
    bool truncated = false;  // max_paths cap hit
};

// Chains symbols whose full-cohort stats pass kappa/support thresholds along
// increasing mean tau with sufficient core-set overlap, enumerates maximal
// DAG paths, then recomputes per-step stats on the shrinking intersection
// cohort. Deterministic: canonical symbol order everywhere.
PathwayExtraction extract_pathways(const RunRecord& run, const Cohort& cohort,
                                   const MinerParams& params);

// Groups pathways by terminal symbol; clusters sorted by total support.
std::vector<TrajectoryCluster> cluster_pathways(const std::vector<Pathway>& pathways);

struct StepProfileRow {
    EventSymbol symbol;
    double kappa = 0.0;
    int c_m = 0;
    int c_t = 0;
    double p_pos = 0.0;
};

struct StepProfile {
    std::vector<StepProfileRow> rows;
    std::string trend;  // flat | increasing | decreasing | peaked | mixed
};

// p_pos trend over the steps, dead-band 0.02 on consecutive differences.
StepProfile step_profile(const Pathway& pathway);

std::string dot_export(const std::vector<TrajectoryCluster>& clusters);

}  // namespace tforge

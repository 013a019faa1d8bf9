#pragma once

#include <map>
#include <string>
#include <vector>

#include "tforge/attention.hpp"
#include "tforge/counterfactual.hpp"
#include "tforge/store.hpp"
#include "tforge/trajectory.hpp"

namespace tforge {

// Every artifact embeds the effective settings and the hashes of its inputs.
struct Provenance {
    std::string command;
    std::map<std::string, std::string> input_hashes;
    std::string settings_json;  // effective configuration, canonical JSON
};

std::string attention_report_json(const AttentionRanking& ranking,
                                  const Provenance& prov);

std::string trajectory_report_json(const PathwayExtraction& extraction,
                                   const std::vector<TrajectoryCluster>& clusters,
                                   const MinerParams& params, const Provenance& prov);

std::string cf_report_json(const CfResult& result, const Provenance& prov);
CfResult parse_cf_report(const std::string& text);

// per-symbol CSV: grid,density,series with series in {relative, counterfactual};
// returns the written file names. Symbols whose sample sets are degenerate for
// KDE are skipped.
std::vector<std::string> write_kde_exports(const CfResult& result,
                                           const std::string& out_dir);

struct StoreReport {
    std::string json;    // machine-readable summary
    std::string digest;  // plain-text digest
};

// Per-run losses, pairwise Spearman of per-symbol mean tau, kappa rankings,
// and KDE exports for cf_*.json artifacts found in the store directory.
StoreReport build_store_report(const PossibilityStore& store, const std::string& out_dir,
                               const Provenance& prov);

}  // namespace tforge

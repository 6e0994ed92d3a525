#pragma once

#include <map>
#include <string>
#include <vector>

#include "raglen/generation.hpp"
#include "raglen/metric.hpp"

namespace raglen {

enum class PanelMode {
    pooled,
    single,
};

struct PanelConfig {
    std::vector<SystemConfig> systems;
    long long samples_per_system = 3;
    long long top_m = 3;
    PanelMode mode = PanelMode::pooled;
};

void validate_panel(const PanelConfig& panel);

struct UtilityMatrix {
    std::vector<std::string> candidate_ids;
    std::vector<std::vector<double>> values;  // diagonal stored as 1, never read
};

struct SilverRef {
    std::string candidate_id;
    std::string system_id;
    std::string text;
    double mbr_score = 0.0;
};

struct SilverReferenceSet {
    std::string example_id;
    std::vector<SilverRef> refs;  // mbr_score descending
    long long pool_size = 0;
};

struct PoolProvenance {
    std::map<std::string, long long> counts;  // system_id -> selected refs
    long long total = 0;
};

std::string candidate_key(const std::string& system_id, long long sample_idx);

struct PoolBuildResult {
    // example_id -> |systems| * samples_per_system candidates; examples where
    // any panel system failed are excluded and listed instead.
    std::map<std::string, std::vector<CandidateSummary>> pools;
    std::vector<std::string> excluded_examples;
};

PoolBuildResult build_pool(const PanelConfig& panel, const std::vector<Example>& subset,
                           const TokenBudget& budget, const SummaryBudget& summary_budget,
                           ChatBackend* backend, DiskCache* cache);

// Symmetrized pairwise utility: (f1(i,j) + f1(j,i)) / 2 for i != j.
UtilityMatrix utility_matrix(const std::vector<CandidateSummary>& candidates, Scorer& scorer);

// Mean off-diagonal utility per candidate.
std::vector<double> mbr_scores(const UtilityMatrix& matrix);

// Top-m by mbr_score; ties broken by (system_id, sample_idx). All candidates
// must share an example_id; an all-empty pool is an error.
SilverReferenceSet mbr_select_top(const std::vector<CandidateSummary>& candidates,
                                  Scorer& scorer, long long m);

struct SilverBuildResult {
    std::vector<SilverReferenceSet> sets;  // subset order
    std::vector<std::string> excluded_examples;
};

SilverBuildResult build_silver(const PanelConfig& panel, const std::vector<Example>& subset,
                               const TokenBudget& budget, const SummaryBudget& summary_budget,
                               Scorer& scorer, ChatBackend* backend, DiskCache* cache);

PoolProvenance pool_provenance(const std::vector<SilverReferenceSet>& silver);

// Line-delimited {example_id, refs, pool_size} records, byte-deterministic.
std::string silver_to_jsonl(const std::vector<SilverReferenceSet>& silver);
std::vector<SilverReferenceSet> silver_from_jsonl(const std::string& text);

// Two columns (system_id, count) plus a total row.
std::string provenance_table(const PoolProvenance& provenance);

}  // namespace raglen

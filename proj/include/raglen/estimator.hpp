#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raglen/generation.hpp"
#include "raglen/metric.hpp"
#include "raglen/retrieval.hpp"
#include "raglen/silver.hpp"

namespace raglen {

struct LengthGrid {
    long long start = 8192;
    long long stop = 81920;
    long long step = 8192;
};

// start, start+step, ..., stop. (stop - start) must be divisible by step.
std::vector<long long> make_grid(const LengthGrid& grid);

struct SweepPoint {
    long long length = 0;
    std::vector<double> run_scores;  // one entry per sample index
    double mean = 0.0;
    double std_dev = 0.0;  // sample std over run_scores, n-1 divisor
    long long examples_scored = 0;
};

// One SweepPoint per feasible grid length, ascending. Grid lengths above the
// system's usable window are dropped with a warning; a length where every
// example fails is omitted. Rankings are computed once per example.
std::vector<SweepPoint> sweep(const SystemConfig& system, const RetrieverConfig& retriever,
                              const std::vector<SilverReferenceSet>& silver,
                              const std::vector<Example>& subset,
                              const std::vector<long long>& grid, Scorer& scorer,
                              const SummaryBudget& summary_budget, ChatBackend* chat,
                              EmbeddingBackend* embedder, DiskCache* cache);

struct LengthEstimate {
    long long chosen_length = 0;
    long long argmax_length = 0;
    double threshold = 0.0;  // mean at argmax minus its std
    std::vector<SweepPoint> sweep;
};

// Smallest grid length whose mean is within one std of the maximum mean.
// Argmax ties go to the smaller length.
LengthEstimate select_length(const std::vector<SweepPoint>& points);

struct EvalResult {
    double mean = 0.0;
    double std_dev = 0.0;
    std::vector<double> run_scores;
    long long examples_scored = 0;
};

// Same aggregation as a SweepPoint, against per-example reference lists.
EvalResult evaluate_at_length(const SystemConfig& system, const RetrieverConfig& retriever,
                              const std::vector<Example>& dataset, long long length,
                              const std::map<std::string, std::vector<std::string>>& references,
                              Scorer& scorer, const SummaryBudget& summary_budget,
                              ChatBackend* chat, EmbeddingBackend* embedder, DiskCache* cache);

struct BaselineFileRow {
    long long supported = 0;
    std::optional<long long> ruler;
    std::optional<long long> helmet_summ;
    std::optional<long long> helmet_longqa;
};

using BaselineTable = std::map<std::string, BaselineFileRow>;

// CSV with header model_id,supported,ruler,helmet_summ,helmet_longqa; empty
// cells mean "no published estimate".
BaselineTable load_baselines(const std::string& path);

struct BaselineEstimates {
    long long full_context = 0;  // min(supported_context, input cap)
    std::optional<long long> ruler;
    std::optional<long long> helmet_summ;
    std::optional<long long> helmet_longqa;
};

BaselineEstimates baselines_for(const BaselineTable& table, const std::string& model_id,
                                long long supported_context, const TokenBudget& input_cap);

struct ComparisonRow {
    std::string method;
    long long length = 0;
    bool clamped = false;  // requested length exceeded the usable window
    double mean = 0.0;
    double std_dev = 0.0;
    long long examples_scored = 0;
};

// Rows in fixed order: full-context, RULER, HELMET-Summ, HELMET-LongQA, Ours
// (optionals skipped when absent). Lengths above the usable window are
// clamped and flagged.
std::vector<ComparisonRow> compare_baselines(
    const SystemConfig& system, const RetrieverConfig& retriever,
    const std::vector<Example>& dataset,
    const std::map<std::string, std::vector<std::string>>& references,
    const BaselineEstimates& baselines, long long ours_length, Scorer& scorer,
    const SummaryBudget& summary_budget, ChatBackend* chat, EmbeddingBackend* embedder,
    DiskCache* cache);

}  // namespace raglen

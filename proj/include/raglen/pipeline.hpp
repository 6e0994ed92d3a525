#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "raglen/estimator.hpp"
#include "raglen/generation.hpp"
#include "raglen/metric.hpp"
#include "raglen/retrieval.hpp"
#include "raglen/silver.hpp"

namespace raglen {

struct RunConfig {
    std::string dataset_path;
    std::string output_dir;
    std::optional<std::string> baselines_path;
    long long seed = 0;
    double sample_fraction = 0.25;
    TokenBudget input_cap{131072};
    std::optional<long long> summary_budget_words;  // calibrated from gold when absent
    RetrieverConfig retriever;
    SystemConfig summarizer;
    PanelConfig panel;
    MetricSpec metric;
    LengthGrid grid;
    bool offline = false;
    std::string raw_json;  // original config file bytes, copied into the run dir
};

// Parses and validates the JSON config file. Endpoint shapes are checked
// unless offline is set.
RunConfig load_run_config(const std::string& path);
void validate_config(const RunConfig& config);

// 12 hex chars over the semantically relevant fields; endpoints, output_dir,
// the baselines path, offline, and concurrency knobs do not participate.
std::string config_hash(const RunConfig& config);

std::string dataset_hash_of(const std::string& path);

std::filesystem::path run_dir_for(const RunConfig& config);

struct StageStatus {
    bool done = false;
    std::string completed_at;  // ISO-8601 UTC, empty until done
};

struct RunManifest {
    std::string config_hash;
    std::string dataset_hash;
    std::string version;
    StageStatus silver;
    StageStatus sweep;
    StageStatus final_eval;
    StageStatus report;
};

RunManifest load_manifest(const std::filesystem::path& run_dir);
void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

struct Backends {
    ChatBackend* chat = nullptr;
    EmbeddingBackend* embedder = nullptr;
    ScoreBackend* scorer = nullptr;  // unused for the lexical metric
};

struct OwnedBackends {
    std::unique_ptr<ChatBackend> chat;
    std::unique_ptr<EmbeddingBackend> embedder;
    std::unique_ptr<ScoreBackend> scorer;

    Backends view() const { return Backends{chat.get(), embedder.get(), scorer.get()}; }
};

// Backends that throw BackendError on any invocation; cache hits never reach
// them, so warm-cache runs succeed offline.
OwnedBackends make_offline_backends();

// Stage commands. Each owns the run directory via a lockfile for the call's
// duration, is manifest-gated for resumability, and refuses to overwrite
// completed stage outputs unless force is set.
void cmd_silver(const RunConfig& config, const Backends& backends, bool force);
void cmd_estimate(const RunConfig& config, const Backends& backends, bool force);
void cmd_run(const RunConfig& config, const Backends& backends,
             std::optional<long long> length_override, bool force);
void cmd_report(const std::string& output_dir);

}  // namespace raglen

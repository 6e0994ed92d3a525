#pragma once

#include <optional>
#include <string>
#include <vector>

#include "raglen/corpus.hpp"
#include "raglen/retrieval.hpp"

namespace raglen {

class DiskCache;

struct SystemConfig {
    std::string system_id;
    std::string endpoint;
    std::string model_id;
    double temperature = 0.5;
    long long n_samples = 3;
    long long max_output_tokens = 0;  // resolved from the summary budget when 0
    long long supported_context = 0;
    TokenizerSpec tokenizer;
    long long seed_base = 0;
    int max_in_flight = 4;
};

// Throws ValidationError on an unusable config.
void validate_system(const SystemConfig& config);

struct CandidateSummary {
    std::string example_id;
    std::string system_id;
    long long sample_idx = 0;
    std::string text;
    long long context_length_used = 0;
};

struct ChatRequest {
    std::string endpoint;
    std::string model_id;
    std::string prompt;
    double temperature = 0.0;
    long long max_tokens = 0;
    std::optional<long long> seed;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

// Documents joined by blank lines (title line first when present), then the
// question and the fixed instruction block. Byte-stable for fixed inputs.
std::string build_prompt(const std::vector<Document>& documents, const std::string& question,
                         long long num_words);

// Token cost of everything build_prompt adds beyond the document texts.
long long prompt_overhead_tokens(const Example& example, long long num_words,
                                 const TokenizerSpec& tokenizer);

struct GenerationFailure {
    std::string example_id;
    std::string message;
};

struct GenerationRun {
    std::vector<CandidateSummary> candidates;  // sorted by (example_id, sample_idx)
    std::vector<GenerationFailure> failures;
};

class GenerationClient {
public:
    GenerationClient(SystemConfig config, ChatBackend* backend, DiskCache* cache);

    // n_samples completions for one prompt; caches per (model, prompt,
    // temperature, max_tokens, sample). Rejects oversize prompts locally.
    std::vector<CandidateSummary> generate(const std::string& prompt,
                                           const SummaryBudget& budget,
                                           const std::string& example_id,
                                           long long context_length_used);

    // Largest prompt the system accepts once the output reservation is taken.
    long long usable_context() const;

    const SystemConfig& config() const { return config_; }

private:
    SystemConfig config_;
    ChatBackend* backend_;
    DiskCache* cache_;
};

// Full-corpus path: documents truncated longest-first so the whole prompt fits
// min(budget, usable window). Failed examples are reported, not fatal.
GenerationRun run_full_context(const SystemConfig& system, const std::vector<Example>& dataset,
                               const TokenBudget& budget, const SummaryBudget& summary_budget,
                               ChatBackend* backend, DiskCache* cache);

// RAG path: pack the ranking at exactly `length` tokens and prompt with the
// packed documents. context_length_used = length.
std::vector<CandidateSummary> run_rag(const SystemConfig& system,
                                      const RetrievalRanking& ranking, const Example& example,
                                      const TokenBudget& length,
                                      const SummaryBudget& summary_budget, ChatBackend* backend,
                                      DiskCache* cache);

}  // namespace raglen

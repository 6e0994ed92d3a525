#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "raglen/corpus.hpp"

namespace raglen {

class DiskCache;

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

struct RetrieverConfig {
    std::string endpoint;
    std::string model_id;
    long long unit_token_cap = 1024;  // embedding input is capped at this many tokens
    TokenizerSpec tokenizer;
    int max_in_flight = 4;
};

struct RetrievalRanking {
    std::string example_id;
    std::vector<std::pair<std::string, double>> ranked;  // (doc_id, similarity), best first
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    // Returns one vector per input, same order.
    virtual std::vector<EmbeddingVector> embed(const RetrieverConfig& config,
                                               const std::vector<std::string>& texts) = 0;
};

// Caches embeddings on disk keyed by model and capped text. All vectors
// observed through one client must share a dimension.
class EmbeddingClient {
public:
    EmbeddingClient(RetrieverConfig config, EmbeddingBackend* backend, DiskCache* cache);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
    EmbeddingVector embed_one(const std::string& text);

    const RetrieverConfig& config() const { return config_; }

private:
    RetrieverConfig config_;
    EmbeddingBackend* backend_;
    DiskCache* cache_;
    std::size_t expected_dim_ = 0;  // 0 until the first vector is seen
};

// Result clamped to [-1, 1]. Throws on dimension mismatch or zero-norm input.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Descending similarity; equal scores keep document order.
std::vector<std::pair<std::string, double>> rank_documents(
    const EmbeddingVector& query, const std::vector<EmbeddingVector>& docs,
    const std::vector<std::string>& doc_ids);

RetrievalRanking rank_example(EmbeddingClient& client, const Example& example);

struct PackResult {
    std::vector<std::string> doc_ids;  // selected docs, original document order
    long long total_tokens = 0;
    // Set when the best-ranked doc alone exceeds the budget and was cut to fit.
    std::optional<long long> head_truncated_to;
};

// Greedy prefix of the ranking under budget.max_tokens; packing stops at the
// first doc that does not fit.
PackResult pack_context(const Example& example, const RetrievalRanking& ranking,
                        const TokenBudget& budget, const TokenizerSpec& tokenizer);

}  // namespace raglen

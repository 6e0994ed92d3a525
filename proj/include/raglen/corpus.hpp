#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace raglen {

// Token accounting is a whitespace word count scaled by a model-specific
// word-to-token ratio. Exact subword tokenizers can be plugged in later by
// swapping this spec; everything downstream only sees token counts.
struct TokenizerSpec {
    std::string name = "whitespace";
    double word_to_token_ratio = 1.3;
};

struct Document {
    std::string doc_id;
    std::optional<std::string> title;
    std::string text;
    std::optional<long long> cached_token_count;
};

struct Example {
    std::string example_id;
    std::string query;
    std::vector<Document> documents;
    std::optional<std::string> gold_summary;
    std::optional<std::string> domain_tag;
};

struct SummaryBudget {
    long long num_words = 0;         // inserted into the prompt
    long long max_output_tokens = 0; // ceil(num_words * ratio)
};

struct TokenBudget {
    long long max_tokens = 0;
};

long long whitespace_word_count(std::string_view text);

// Prefix of `text` spanning its first `words` whitespace-delimited words,
// original separators preserved.
std::string_view prefix_words(std::string_view text, long long words);

long long count_tokens(std::string_view text, const TokenizerSpec& spec);

// Largest word count whose token count stays within max_tokens.
long long max_words_for_tokens(long long max_tokens, const TokenizerSpec& spec);

// Line-delimited records, one example per line; validates invariants and
// reports the offending line number on malformed input.
std::vector<Example> load_dataset(const std::filesystem::path& path);

struct TruncationResult {
    Example example;
    std::vector<std::string> removed_doc_ids;  // truncated to zero words
    long long total_tokens = 0;
};

// Repeatedly cuts the longest documents (earliest-first on ties) until the
// total fits the budget. Document order is preserved and tokens are only
// ever removed from a document's tail.
TruncationResult truncate_longest_first(const Example& example, const TokenBudget& budget,
                                        const TokenizerSpec& spec);

// ceil(fraction * N) distinct examples, uniform without replacement, stable
// for a fixed (dataset order, fraction, seed); output keeps dataset order.
std::vector<Example> sample_subset(const std::vector<Example>& dataset, double fraction,
                                   long long seed);

long long subset_size(std::size_t dataset_size, double fraction);

// num_words = nearest-rank 80th percentile of gold-summary word counts.
SummaryBudget calibrate_summary_budget(const std::vector<Example>& dataset,
                                       const TokenizerSpec& spec);

SummaryBudget make_summary_budget(long long num_words, const TokenizerSpec& spec);

}  // namespace raglen

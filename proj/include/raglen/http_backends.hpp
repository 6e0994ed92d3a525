#pragma once

#include <string>

#include "raglen/generation.hpp"
#include "raglen/metric.hpp"
#include "raglen/retrieval.hpp"

namespace raglen {

struct RetryPolicy {
    int attempts = 3;
    int backoff_initial_ms = 250;  // doubles per retry
};

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // leading slash, "/" when the URL has no path
};

// Accepts http:// and https:// URLs only.
SplitUrl split_url(const std::string& url);

// POSTs the chat-completions wire shape to the configured endpoint.
// Bearer token read from RAGLEN_GEN_TOKEN when set.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(RetryPolicy policy = {});
    std::string complete(const ChatRequest& request) override;

private:
    RetryPolicy policy_;
};

// POSTs {model, input} and reads {data:[{index, embedding}]}.
// Bearer token read from RAGLEN_EMB_TOKEN when set.
class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(RetryPolicy policy = {});
    std::vector<EmbeddingVector> embed(const RetrieverConfig& config,
                                       const std::vector<std::string>& texts) override;

private:
    RetryPolicy policy_;
};

// POSTs {hypothesis, reference} and reads {precision, recall, f1}.
// Bearer token read from RAGLEN_METRIC_TOKEN when set.
class HttpScoreBackend : public ScoreBackend {
public:
    explicit HttpScoreBackend(RetryPolicy policy = {});
    ScoreTriple score(const MetricSpec& spec, const std::string& hypothesis,
                      const std::string& reference) override;

private:
    RetryPolicy policy_;
};

}  // namespace raglen

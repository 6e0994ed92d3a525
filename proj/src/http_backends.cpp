#include "raglen/http_backends.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "raglen/errors.hpp"

namespace raglen {

namespace {

std::string snippet(const std::string& body) {
    if (body.size() <= 200) return body;
    return body.substr(0, 200) + "...";
}

httplib::Headers auth_headers(const char* token_env) {
    httplib::Headers headers;
    if (const char* token = std::getenv(token_env); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    return headers;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const char* token_env, const RetryPolicy& policy) {
    SplitUrl split = split_url(url);
    httplib::Client client(split.base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(600, 0);
    client.set_write_timeout(60, 0);
    httplib::Headers headers = auth_headers(token_env);
    const std::string payload = body.dump();

    std::string last_error;
    int backoff_ms = policy.backoff_initial_ms;
    for (int attempt = 1; attempt <= policy.attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        auto res = client.Post(split.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            auto parsed = nlohmann::json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) {
                throw BackendError("endpoint " + url + " returned invalid JSON: " +
                                   snippet(res->body));
            }
            return parsed;
        }
        if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + snippet(res->body);
            continue;
        }
        throw BackendError("endpoint " + url + " rejected the request with HTTP " +
                           std::to_string(res->status) + ": " + snippet(res->body));
    }
    throw BackendError("endpoint " + url + " failed after " + std::to_string(policy.attempts) +
                       " attempts; last error: " + last_error);
}

}  // namespace

SplitUrl split_url(const std::string& url) {
    const std::string http = "http://";
    const std::string https = "https://";
    std::size_t host_start = 0;
    if (url.rfind(http, 0) == 0) {
        host_start = http.size();
    } else if (url.rfind(https, 0) == 0) {
        host_start = https.size();
    } else {
        throw ValidationError("endpoint '" + url + "' must start with http:// or https://");
    }
    std::size_t path_start = url.find('/', host_start);
    if (path_start == host_start) {
        throw ValidationError("endpoint '" + url + "' has an empty host");
    }
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.base = url;
        out.path = "/";
    } else {
        out.base = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    return out;
}

HttpChatBackend::HttpChatBackend(RetryPolicy policy) : policy_(policy) {}

std::string HttpChatBackend::complete(const ChatRequest& request) {
    nlohmann::json body{
        {"model", request.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (request.seed) body["seed"] = *request.seed;

    nlohmann::json res = post_json(request.endpoint, body, "RAGLEN_GEN_TOKEN", policy_);
    if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty() ||
        !res["choices"][0].contains("message") ||
        !res["choices"][0]["message"].contains("content") ||
        !res["choices"][0]["message"]["content"].is_string()) {
        throw BackendError("generation response missing choices[0].message.content");
    }
    return res["choices"][0]["message"]["content"].get<std::string>();
}

HttpEmbeddingBackend::HttpEmbeddingBackend(RetryPolicy policy) : policy_(policy) {}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed(const RetrieverConfig& config,
                                                         const std::vector<std::string>& texts) {
    nlohmann::json body{{"model", config.model_id}, {"input", texts}};
    nlohmann::json res = post_json(config.endpoint, body, "RAGLEN_EMB_TOKEN", policy_);
    if (!res.contains("data") || !res["data"].is_array()) {
        throw BackendError("embedding response missing data array");
    }
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<char> seen(texts.size(), 0);
    for (const auto& item : res["data"]) {
        if (!item.contains("index") || !item["index"].is_number_integer() ||
            !item.contains("embedding") || !item["embedding"].is_array()) {
            throw BackendError("embedding response item missing index or embedding");
        }
        long long index = item["index"].get<long long>();
        if (index < 0 || index >= static_cast<long long>(texts.size())) {
            throw BackendError("embedding response index " + std::to_string(index) +
                               " out of range");
        }
        auto& slot = out[static_cast<std::size_t>(index)];
        for (const auto& v : item["embedding"]) {
            if (!v.is_number()) throw BackendError("embedding response holds a non-number");
            slot.values.push_back(v.get<double>());
        }
        seen[static_cast<std::size_t>(index)] = 1;
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!seen[i]) {
            throw BackendError("embedding response missing index " + std::to_string(i));
        }
    }
    return out;
}

HttpScoreBackend::HttpScoreBackend(RetryPolicy policy) : policy_(policy) {}

ScoreTriple HttpScoreBackend::score(const MetricSpec& spec, const std::string& hypothesis,
                                    const std::string& reference) {
    if (!spec.endpoint) throw ValidationError("remote metric requires an endpoint");
    nlohmann::json body{{"hypothesis", hypothesis}, {"reference", reference}};
    nlohmann::json res = post_json(*spec.endpoint, body, "RAGLEN_METRIC_TOKEN", policy_);
    ScoreTriple triple;
    for (const auto& [field, target] :
         {std::pair<const char*, double*>{"precision", &triple.precision},
          {"recall", &triple.recall},
          {"f1", &triple.f1}}) {
        if (!res.contains(field) || !res[field].is_number()) {
            throw BackendError(std::string("metric response missing numeric '") + field + "'");
        }
        *target = res[field].get<double>();
    }
    return triple;
}

}  // namespace raglen

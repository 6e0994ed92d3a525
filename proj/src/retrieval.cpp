#include "raglen/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "json.hpp"
#include "raglen/cache.hpp"
#include "raglen/errors.hpp"
#include "raglen/hash.hpp"

namespace raglen {

namespace {

std::optional<std::vector<double>> parse_embedding(const std::string& text) {
    auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (!parsed.is_array() || parsed.empty()) return std::nullopt;
    std::vector<double> values;
    values.reserve(parsed.size());
    for (const auto& v : parsed) {
        if (!v.is_number()) return std::nullopt;
        values.push_back(v.get<double>());
    }
    return values;
}

}  // namespace

EmbeddingClient::EmbeddingClient(RetrieverConfig config, EmbeddingBackend* backend,
                                 DiskCache* cache)
    : config_(std::move(config)), backend_(backend), cache_(cache) {
    if (config_.model_id.empty()) throw ValidationError("retriever model_id is empty");
    if (config_.unit_token_cap < 1) throw ValidationError("unit_token_cap must be >= 1");
    if (backend_ == nullptr) throw ValidationError("embedding backend is null");
}

std::vector<EmbeddingVector> EmbeddingClient::embed(const std::vector<std::string>& texts) {
    const long long cap_words = max_words_for_tokens(config_.unit_token_cap, config_.tokenizer);

    std::vector<std::string> capped(texts.size());
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        capped[i] = std::string(prefix_words(texts[i], cap_words));
        if (capped[i].empty()) {
            throw ValidationError("cannot embed empty text (input " + std::to_string(i) + ")");
        }
        std::string material = config_.model_id;
        material.push_back('\0');
        material.append(capped[i]);
        keys[i] = "emb/" + fs_sanitize(config_.model_id) + "/" + sha256_hex(material) + ".json";
    }

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<char> have(texts.size(), 0);

    if (cache_ != nullptr) {
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto hit = cache_->get(keys[i])) {
                if (auto values = parse_embedding(*hit)) {
                    out[i].values = std::move(*values);
                    have[i] = 1;
                }
            }
        }
    }

    // Misses are deduplicated by key so identical texts cost one request.
    std::vector<std::string> miss_texts;
    std::unordered_map<std::string, std::size_t> miss_slot;
    std::vector<std::size_t> miss_of(texts.size(), 0);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (have[i]) continue;
        auto it = miss_slot.find(keys[i]);
        if (it == miss_slot.end()) {
            it = miss_slot.emplace(keys[i], miss_texts.size()).first;
            miss_texts.push_back(capped[i]);
        }
        miss_of[i] = it->second;
    }

    std::vector<EmbeddingVector> fetched;
    if (!miss_texts.empty()) {
        fetched = backend_->embed(config_, miss_texts);
        if (fetched.size() != miss_texts.size()) {
            throw BackendError("embedding backend returned " + std::to_string(fetched.size()) +
                               " vectors for " + std::to_string(miss_texts.size()) + " inputs");
        }
    }

    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!have[i]) out[i] = fetched[miss_of[i]];
        if (out[i].dim() == 0) throw BackendError("embedding backend returned an empty vector");
        if (expected_dim_ == 0) expected_dim_ = out[i].dim();
        if (out[i].dim() != expected_dim_) {
            throw BackendError("embedding dimension mismatch: got " +
                               std::to_string(out[i].dim()) + ", expected " +
                               std::to_string(expected_dim_));
        }
    }

    if (cache_ != nullptr && !miss_texts.empty()) {
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (have[i]) continue;
            cache_->put(keys[i], nlohmann::json(out[i].values).dump());
        }
    }
    return out;
}

EmbeddingVector EmbeddingClient::embed_one(const std::string& text) {
    return embed(std::vector<std::string>{text}).front();
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() == 0 || a.dim() != b.dim()) {
        throw ValidationError("cosine_similarity: dimension mismatch (" +
                              std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw ValidationError("cosine_similarity: zero-norm embedding");
    double sim = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(sim, -1.0, 1.0);
}

std::vector<std::pair<std::string, double>> rank_documents(
    const EmbeddingVector& query, const std::vector<EmbeddingVector>& docs,
    const std::vector<std::string>& doc_ids) {
    if (docs.size() != doc_ids.size()) {
        throw ValidationError("rank_documents: ids and embeddings differ in count");
    }
    std::vector<std::pair<std::string, double>> ranked;
    ranked.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        ranked.emplace_back(doc_ids[i], cosine_similarity(query, docs[i]));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranked;
}

RetrievalRanking rank_example(EmbeddingClient& client, const Example& example) {
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    texts.reserve(example.documents.size() + 1);
    texts.push_back(example.query);
    for (const auto& doc : example.documents) {
        texts.push_back(doc.text);
        ids.push_back(doc.doc_id);
    }
    auto embs = client.embed(texts);

    EmbeddingVector query = std::move(embs.front());
    std::vector<EmbeddingVector> docs(std::make_move_iterator(embs.begin() + 1),
                                      std::make_move_iterator(embs.end()));

    RetrievalRanking ranking;
    ranking.example_id = example.example_id;
    ranking.ranked = rank_documents(query, docs, ids);
    return ranking;
}

PackResult pack_context(const Example& example, const RetrievalRanking& ranking,
                        const TokenBudget& budget, const TokenizerSpec& tokenizer) {
    if (budget.max_tokens < 1) throw ValidationError("pack_context: budget must be >= 1 token");
    if (ranking.ranked.empty()) throw ValidationError("pack_context: ranking is empty");

    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < example.documents.size(); ++i) {
        position.emplace(example.documents[i].doc_id, i);
    }

    std::vector<std::size_t> picked;
    long long total = 0;
    PackResult result;
    for (std::size_t r = 0; r < ranking.ranked.size(); ++r) {
        auto it = position.find(ranking.ranked[r].first);
        if (it == position.end()) {
            throw ValidationError("pack_context: ranking names unknown doc_id '" +
                                  ranking.ranked[r].first + "'");
        }
        long long t = count_tokens(example.documents[it->second].text, tokenizer);
        if (total + t > budget.max_tokens) {
            if (r == 0) {
                // Even the best doc overflows: keep its head alone.
                long long words = max_words_for_tokens(budget.max_tokens, tokenizer);
                auto head = prefix_words(example.documents[it->second].text, words);
                long long kept = count_tokens(head, tokenizer);
                result.doc_ids.push_back(ranking.ranked[r].first);
                result.total_tokens = kept;
                result.head_truncated_to = kept;
                return result;
            }
            break;
        }
        total += t;
        picked.push_back(it->second);
    }

    std::sort(picked.begin(), picked.end());
    for (std::size_t idx : picked) result.doc_ids.push_back(example.documents[idx].doc_id);
    result.total_tokens = total;
    return result;
}

}  // namespace raglen

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "raglen/cache.hpp"
#include "raglen/errors.hpp"
#include "raglen/retrieval.hpp"
#include "stubs.hpp"

using namespace raglen;

namespace {

Example tokens_example(const std::vector<long long>& doc_words) {
    Example example;
    example.example_id = "e";
    example.query = "q";
    for (std::size_t i = 0; i < doc_words.size(); ++i) {
        Document doc;
        doc.doc_id = "d" + std::to_string(i);
        std::string text;
        for (long long w = 0; w < doc_words[i]; ++w) {
            if (!text.empty()) text += ' ';
            text += 'w';
        }
        doc.text = text;
        example.documents.push_back(std::move(doc));
    }
    return example;
}

RetrievalRanking ranking_of(const std::vector<std::string>& ids) {
    RetrievalRanking ranking;
    ranking.example_id = "e";
    double sim = 1.0;
    for (const auto& id : ids) {
        ranking.ranked.emplace_back(id, sim);
        sim -= 0.01;
    }
    return ranking;
}

const TokenizerSpec kUnit{"whitespace", 1.0};

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("cosine similarity hand values") {
    EmbeddingVector ex{{1.0, 0.0}};
    EmbeddingVector ey{{0.0, 1.0}};
    EmbeddingVector diag{{1.0, 1.0}};
    CHECK(cosine_similarity(ex, ex) == doctest::Approx(1.0));
    CHECK(cosine_similarity(ex, ey) == doctest::Approx(0.0));
    CHECK(cosine_similarity(ex, diag) == doctest::Approx(1.0 / std::sqrt(2.0)));
    EmbeddingVector neg{{-2.0, 0.0}};
    CHECK(cosine_similarity(ex, neg) == doctest::Approx(-1.0));

    // scaled parallel vectors stay clamped inside [-1, 1]
    EmbeddingVector a{{1e-3, 2e-3, 3e-3}};
    EmbeddingVector b{{2e-3, 4e-3, 6e-3}};
    CHECK(cosine_similarity(a, b) <= 1.0);
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0));

    EmbeddingVector zero{{0.0, 0.0}};
    CHECK_THROWS_AS(cosine_similarity(ex, zero), ValidationError);
    EmbeddingVector three{{1.0, 0.0, 0.0}};
    CHECK_THROWS_AS(cosine_similarity(ex, three), ValidationError);
}

TEST_CASE("ranking is descending with position-stable ties") {
    EmbeddingVector query{{1.0, 0.0}};
    std::vector<EmbeddingVector> docs{
        {{0.0, 1.0}},   // sim 0
        {{1.0, 0.0}},   // sim 1
        {{1.0, 1.0}},   // sim 1/sqrt(2)
        {{1.0, 0.0}},   // sim 1, tie with d1
    };
    auto ranked = rank_documents(query, docs, {"d0", "d1", "d2", "d3"});
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].first == "d1");
    CHECK(ranked[1].first == "d3");  // tie broken by original position
    CHECK(ranked[2].first == "d2");
    CHECK(ranked[3].first == "d0");
    CHECK(ranked[0].second >= ranked[1].second);
    CHECK(ranked[1].second >= ranked[2].second);
}

TEST_CASE("embedding client caches, dedups, and caps its inputs") {
    auto dir = std::filesystem::temp_directory_path() / "raglen_emb_cache";
    std::filesystem::remove_all(dir);
    DiskCache cache(dir.string());

    std::vector<std::string> seen;
    raglen_tests::LambdaEmbed backend;
    backend.fn = [&seen](const std::string& text) {
        seen.push_back(text);
        return EmbeddingVector{{1.0, static_cast<double>(text.size())}};
    };

    RetrieverConfig config;
    config.model_id = "emb-test";
    config.unit_token_cap = 13;  // ratio 1.3 -> 10 words survive
    EmbeddingClient client(config, &backend, &cache);

    std::string long_text;
    for (int w = 0; w < 50; ++w) long_text += "word ";
    auto vectors = client.embed({long_text, long_text, "short text"});
    REQUIRE(vectors.size() == 3);
    CHECK(backend.calls == 1);
    REQUIRE(seen.size() == 2);  // duplicate collapsed before the backend
    CHECK(whitespace_word_count(seen[0]) == 10);
    CHECK(vectors[0].values == vectors[1].values);

    // same inputs again: served from disk, no backend traffic
    auto again = client.embed({long_text, "short text"});
    CHECK(backend.calls == 1);
    CHECK(again[0].values == vectors[0].values);

    // a fresh client over the same cache still sees the entries
    EmbeddingClient other(config, &backend, &cache);
    auto cached = other.embed({"short text"});
    CHECK(backend.calls == 1);
    CHECK(cached[0].values == vectors[2].values);

    CHECK_THROWS_AS(client.embed({""}), ValidationError);
    CHECK_THROWS_AS(client.embed({"   "}), ValidationError);
}

TEST_CASE("embedding client enforces one dimension per run") {
    auto dir = std::filesystem::temp_directory_path() / "raglen_emb_dim";
    std::filesystem::remove_all(dir);
    DiskCache cache(dir.string());

    raglen_tests::LambdaEmbed backend;
    backend.fn = [](const std::string& text) {
        if (text == "three") return EmbeddingVector{{1.0, 2.0, 3.0}};
        return EmbeddingVector{{1.0, 2.0}};
    };
    RetrieverConfig config;
    config.model_id = "emb-dim";
    EmbeddingClient client(config, &backend, &cache);
    client.embed({"two"});
    CHECK_THROWS_AS(client.embed({"three"}), BackendError);
}

TEST_CASE("packing takes the greedy ranking prefix and restores corpus order") {
    Example example = tokens_example({5, 5, 5});
    auto result = pack_context(example, ranking_of({"d2", "d0", "d1"}), TokenBudget{12}, kUnit);
    REQUIRE(result.doc_ids.size() == 2);
    CHECK(result.doc_ids[0] == "d0");  // original order, not ranking order
    CHECK(result.doc_ids[1] == "d2");
    CHECK(result.total_tokens == 10);
    CHECK(!result.head_truncated_to.has_value());
}

TEST_CASE("packing stops at the first document that does not fit") {
    Example example = tokens_example({10, 100, 5});
    auto result = pack_context(example, ranking_of({"d0", "d1", "d2"}), TokenBudget{20}, kUnit);
    // d1 fails to fit, so d2 is never considered even though it would fit
    REQUIRE(result.doc_ids.size() == 1);
    CHECK(result.doc_ids[0] == "d0");
    CHECK(result.total_tokens == 10);
}

TEST_CASE("an oversized head document is cut to the budget") {
    Example example = tokens_example({100, 5});
    auto result = pack_context(example, ranking_of({"d0", "d1"}), TokenBudget{30}, kUnit);
    REQUIRE(result.doc_ids.size() == 1);
    CHECK(result.doc_ids[0] == "d0");
    REQUIRE(result.head_truncated_to.has_value());
    CHECK(*result.head_truncated_to == 30);
    CHECK(result.total_tokens == 30);
}

TEST_CASE("packing rejects empty rankings and non-positive budgets") {
    Example example = tokens_example({5});
    RetrievalRanking empty;
    empty.example_id = "e";
    CHECK_THROWS_AS(pack_context(example, empty, TokenBudget{10}, kUnit), ValidationError);
    CHECK_THROWS_AS(pack_context(example, ranking_of({"d0"}), TokenBudget{0}, kUnit),
                    ValidationError);
}

TEST_CASE("packing invariants across random instances") {
    std::mt19937_64 rng(17);
    TokenizerSpec spec;  // ratio 1.3
    for (int trial = 0; trial < 150; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 8);
        std::vector<long long> sizes;
        for (int i = 0; i < n; ++i) sizes.push_back(1 + static_cast<long long>(rng() % 40));
        Example example = tokens_example(sizes);

        std::vector<std::string> order;
        for (int i = 0; i < n; ++i) order.push_back("d" + std::to_string(i));
        std::shuffle(order.begin(), order.end(), rng);

        TokenBudget budget{1 + static_cast<long long>(rng() % 120)};
        auto result = pack_context(example, ranking_of(order), budget, spec);

        CHECK(result.total_tokens <= budget.max_tokens);
        if (result.head_truncated_to.has_value()) {
            CHECK(result.doc_ids.size() == 1);
            CHECK(result.doc_ids[0] == order[0]);
            continue;
        }
        // reference greedy walk over the ranking
        std::vector<std::string> expected;
        long long used = 0;
        for (const auto& id : order) {
            long long tok = 0;
            for (std::size_t i = 0; i < example.documents.size(); ++i) {
                if (example.documents[i].doc_id == id) {
                    tok = count_tokens(example.documents[i].text, spec);
                }
            }
            if (used + tok > budget.max_tokens) break;
            used += tok;
            expected.push_back(id);
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
        });
        CHECK(result.doc_ids == expected);
        CHECK(result.total_tokens == used);
    }
}

}  // TEST_SUITE

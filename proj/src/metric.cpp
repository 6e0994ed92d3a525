#include "raglen/metric.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "json.hpp"
#include "raglen/cache.hpp"
#include "raglen/errors.hpp"
#include "raglen/hash.hpp"

namespace raglen {

namespace {

bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

double harmonic_f1(double p, double r) {
    if (p + r <= 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

// Accepts a hair of float slop from remote scorers, rejects anything else.
double checked_unit(double v, const char* field) {
    if (!std::isfinite(v) || v < -1e-9 || v > 1.0 + 1e-9) {
        throw BackendError(std::string("metric response field '") + field +
                           "' outside [0, 1]");
    }
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

}  // namespace

std::vector<std::string> lexical_tokens(std::string_view text, const StopwordSet& stopwords) {
    // Pipeline order is fixed: lowercase, drop punctuation, split, filter.
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(u)));
    }
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && is_ws(cleaned[i])) ++i;
        std::size_t j = i;
        while (j < cleaned.size() && !is_ws(cleaned[j])) ++j;
        if (j > i) {
            std::string tok = cleaned.substr(i, j - i);
            if (stopwords.find(tok) == stopwords.end()) out.push_back(std::move(tok));
        }
        i = j;
    }
    return out;
}

ScoreTriple lexical_f1(std::string_view hypothesis, std::string_view reference,
                       const StopwordSet& stopwords) {
    auto hyp = lexical_tokens(hypothesis, stopwords);
    auto ref = lexical_tokens(reference, stopwords);

    std::unordered_map<std::string, long long> ref_counts;
    for (const auto& t : ref) ++ref_counts[t];

    long long overlap = 0;
    for (const auto& t : hyp) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }

    ScoreTriple s;
    s.precision = hyp.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(hyp.size());
    s.recall = ref.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(ref.size());
    s.f1 = harmonic_f1(s.precision, s.recall);
    return s;
}

ScoreTriple lexical_f1(std::string_view hypothesis, std::string_view reference) {
    return lexical_f1(hypothesis, reference, english_stopwords());
}

Scorer::Scorer(MetricSpec spec, ScoreBackend* backend, DiskCache* cache)
    : spec_(std::move(spec)), backend_(backend), cache_(cache) {
    if (spec_.kind == MetricKind::remote_a3cu) {
        if (!spec_.endpoint || spec_.endpoint->empty()) {
            throw ValidationError("remote metric requires an endpoint");
        }
        if (backend_ == nullptr) {
            throw ValidationError("remote metric requires a score backend");
        }
    }
}

ScoreTriple Scorer::score(const std::string& hypothesis, const std::string& reference) {
    if (spec_.kind == MetricKind::lexical_f1) return lexical_f1(hypothesis, reference);
    return remote_score(hypothesis, reference);
}

double Scorer::score_against_refs(const std::string& hypothesis,
                                  const std::vector<std::string>& refs) {
    if (refs.empty()) throw ValidationError("score_against_refs: reference list is empty");
    double sum = 0.0;
    for (const auto& ref : refs) sum += score(hypothesis, ref).f1;
    return sum / static_cast<double>(refs.size());
}

ScoreTriple Scorer::remote_score(const std::string& hypothesis, const std::string& reference) {
    std::string key;
    if (cache_ != nullptr) {
        std::string pair = hypothesis;
        pair.push_back('\0');
        pair.append(reference);
        key = "score/" + sha256_hex(pair) + ".json";
        if (auto hit = cache_->get(key)) {
            auto parsed = nlohmann::json::parse(*hit, nullptr, false);
            if (parsed.is_object() && parsed.contains("precision") && parsed.contains("recall") &&
                parsed.contains("f1") && parsed["precision"].is_number() &&
                parsed["recall"].is_number() && parsed["f1"].is_number()) {
                ScoreTriple s;
                s.precision = parsed["precision"].get<double>();
                s.recall = parsed["recall"].get<double>();
                s.f1 = parsed["f1"].get<double>();
                return s;
            }
            // Corrupt entry: fall through and recompute.
        }
    }

    ScoreTriple raw = backend_->score(spec_, hypothesis, reference);
    ScoreTriple s;
    s.precision = checked_unit(raw.precision, "precision");
    s.recall = checked_unit(raw.recall, "recall");
    s.f1 = checked_unit(raw.f1, "f1");

    if (cache_ != nullptr) {
        nlohmann::json out{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
        cache_->put(key, out.dump());
    }
    return s;
}

}  // namespace raglen

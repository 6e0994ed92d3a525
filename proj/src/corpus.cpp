#include "raglen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "json.hpp"
#include "raglen/errors.hpp"
#include "raglen/rng.hpp"

namespace raglen {

namespace {

using nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Guard against products like 10 * 1.3 landing a hair above the integer.
constexpr double kCeilNudge = 1e-9;

long long ceil_nudged(double x) {
    return static_cast<long long>(std::ceil(x - kCeilNudge));
}

std::string json_context(std::size_t line_no, const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
}

std::optional<std::string> opt_string_field(const json& rec, const char* key) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

std::string required_string(const json& rec, const char* key) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null())
        throw ValidationError(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

Example parse_example(const json& rec) {
    Example ex;
    ex.example_id = required_string(rec, "example_id");
    if (ex.example_id.empty()) throw ValidationError("empty example_id");
    ex.query = required_string(rec, "query");
    ex.gold_summary = opt_string_field(rec, "gold_summary");
    ex.domain_tag = opt_string_field(rec, "domain_tag");

    auto docs_it = rec.find("documents");
    if (docs_it == rec.end() || !docs_it->is_array())
        throw ValidationError("missing or non-array field 'documents'");
    if (docs_it->empty()) throw ValidationError("empty document list");

    std::unordered_set<std::string> seen_ids;
    for (const auto& d : *docs_it) {
        Document doc;
        doc.doc_id = required_string(d, "doc_id");
        if (doc.doc_id.empty()) throw ValidationError("empty doc_id");
        if (!seen_ids.insert(doc.doc_id).second)
            throw ValidationError("duplicate doc_id '" + doc.doc_id + "'");
        doc.title = opt_string_field(d, "title");
        doc.text = required_string(d, "text");
        if (doc.text.empty()) throw ValidationError("empty text in doc '" + doc.doc_id + "'");
        ex.documents.push_back(std::move(doc));
    }
    return ex;
}

}  // namespace

long long whitespace_word_count(std::string_view text) {
    long long words = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return words;
}

std::string_view prefix_words(std::string_view text, long long words) {
    if (words <= 0) return text.substr(0, 0);
    long long seen = 0;
    bool in_word = false;
    std::size_t cut = text.size();
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_space(text[i])) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            if (++seen > words) {
                cut = i;
                break;
            }
        }
    }
    while (cut > 0 && is_space(text[cut - 1])) --cut;
    return text.substr(0, cut);
}

long long count_tokens(std::string_view text, const TokenizerSpec& spec) {
    if (spec.word_to_token_ratio <= 0)
        throw ValidationError("word_to_token_ratio must be positive");
    const long long words = whitespace_word_count(text);
    if (words == 0) return 0;
    return std::max<long long>(0, ceil_nudged(static_cast<double>(words) * spec.word_to_token_ratio));
}

long long max_words_for_tokens(long long max_tokens, const TokenizerSpec& spec) {
    if (max_tokens <= 0) return 0;
    auto tokens_for = [&](long long w) {
        return w <= 0 ? 0 : ceil_nudged(static_cast<double>(w) * spec.word_to_token_ratio);
    };
    long long w = static_cast<long long>(static_cast<double>(max_tokens) / spec.word_to_token_ratio) + 1;
    while (w > 0 && tokens_for(w) > max_tokens) --w;
    while (tokens_for(w + 1) <= max_tokens) ++w;
    return w;
}

std::vector<Example> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset file: " + path.string());

    std::vector<Example> out;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(json_context(line_no, std::string("invalid JSON: ") + e.what()));
        }
        try {
            Example ex = parse_example(rec);
            if (!ids.insert(ex.example_id).second)
                throw ValidationError("duplicate example_id '" + ex.example_id + "'");
            out.push_back(std::move(ex));
        } catch (const ValidationError& e) {
            throw ValidationError(json_context(line_no, e.what()));
        }
    }
    if (out.empty()) log_warn("dataset file " + path.string() + " contains no examples");
    return out;
}

TruncationResult truncate_longest_first(const Example& example, const TokenBudget& budget,
                                        const TokenizerSpec& spec) {
    if (budget.max_tokens < 1) throw ValidationError("token budget must be >= 1");

    const std::size_t n = example.documents.size();
    std::vector<long long> tokens(n);
    for (std::size_t i = 0; i < n; ++i)
        tokens[i] = count_tokens(example.documents[i].text, spec);

    long long total = std::accumulate(tokens.begin(), tokens.end(), 0LL);
    std::vector<long long> target = tokens;

    // Water-fill: lower the group of currently-longest documents together,
    // either to the next-longest level or just far enough to hit the budget.
    // Ties share the cut; a remainder comes off the earliest documents first.
    while (total > budget.max_tokens) {
        long long level = *std::max_element(target.begin(), target.end());
        long long next_level = 0;
        std::vector<std::size_t> at_level;
        for (std::size_t i = 0; i < n; ++i) {
            if (target[i] == level)
                at_level.push_back(i);
            else
                next_level = std::max(next_level, target[i]);
        }
        const long long excess = total - budget.max_tokens;
        const long long removable = static_cast<long long>(at_level.size()) * (level - next_level);
        if (removable >= excess) {
            const long long base = excess / static_cast<long long>(at_level.size());
            const long long rem = excess % static_cast<long long>(at_level.size());
            for (std::size_t k = 0; k < at_level.size(); ++k)
                target[at_level[k]] = level - base - (static_cast<long long>(k) < rem ? 1 : 0);
            total = budget.max_tokens;
        } else {
            for (std::size_t i : at_level) target[i] = next_level;
            total -= removable;
        }
    }

    TruncationResult result;
    result.example.example_id = example.example_id;
    result.example.query = example.query;
    result.example.gold_summary = example.gold_summary;
    result.example.domain_tag = example.domain_tag;
    for (std::size_t i = 0; i < n; ++i) {
        const Document& doc = example.documents[i];
        Document kept = doc;
        if (target[i] < tokens[i]) {
            const long long words = max_words_for_tokens(target[i], spec);
            if (words == 0) {
                result.removed_doc_ids.push_back(doc.doc_id);
                continue;
            }
            kept.text = std::string(prefix_words(doc.text, words));
        }
        kept.cached_token_count = count_tokens(kept.text, spec);
        result.total_tokens += *kept.cached_token_count;
        result.example.documents.push_back(std::move(kept));
    }
    if (result.example.documents.empty())
        throw ValidationError("budget " + std::to_string(budget.max_tokens) +
                              " truncates every document of example '" + example.example_id +
                              "' to zero");
    return result;
}

long long subset_size(std::size_t dataset_size, double fraction) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw ValidationError("sample fraction must be in (0, 1]");
    const double k = std::ceil(fraction * static_cast<double>(dataset_size) - 1e-9);
    return std::min<long long>(static_cast<long long>(k), static_cast<long long>(dataset_size));
}

std::vector<Example> sample_subset(const std::vector<Example>& dataset, double fraction,
                                   long long seed) {
    if (dataset.empty()) throw ValidationError("cannot sample from an empty dataset");
    const long long k = subset_size(dataset.size(), fraction);

    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (long long i = 0; i < k; ++i) {
        const std::uint64_t j =
            static_cast<std::uint64_t>(i) + bounded_draw(rng, idx.size() - static_cast<std::uint64_t>(i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());

    std::vector<Example> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(dataset[i]);
    return out;
}

SummaryBudget make_summary_budget(long long num_words, const TokenizerSpec& spec) {
    if (num_words < 1) throw ValidationError("summary budget num_words must be >= 1");
    SummaryBudget b;
    b.num_words = num_words;
    b.max_output_tokens =
        std::max<long long>(1, ceil_nudged(static_cast<double>(num_words) * spec.word_to_token_ratio));
    return b;
}

SummaryBudget calibrate_summary_budget(const std::vector<Example>& dataset,
                                       const TokenizerSpec& spec) {
    std::vector<long long> lengths;
    for (const Example& ex : dataset)
        if (ex.gold_summary) lengths.push_back(whitespace_word_count(*ex.gold_summary));
    if (lengths.empty())
        throw ValidationError(
            "no gold summaries to calibrate a summary budget from; supply one explicitly");
    std::sort(lengths.begin(), lengths.end());
    // Nearest-rank percentile: the ceil(p*n)-th smallest value, 1-indexed.
    const auto rank = static_cast<std::size_t>(
        std::max<long long>(1, ceil_nudged(0.80 * static_cast<double>(lengths.size()))));
    return make_summary_budget(lengths[rank - 1], spec);
}

}  // namespace raglen

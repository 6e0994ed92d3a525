#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace raglen {

class DiskCache;

struct ScoreTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

enum class MetricKind {
    lexical_f1,
    remote_a3cu,
};

struct MetricSpec {
    MetricKind kind = MetricKind::lexical_f1;
    std::optional<std::string> endpoint;  // required for remote_a3cu
};

using StopwordSet = std::unordered_set<std::string>;

// Standard English stopword list, 179 entries.
const StopwordSet& english_stopwords();

// Lowercase, strip punctuation, split on whitespace, drop stopwords.
std::vector<std::string> lexical_tokens(std::string_view text, const StopwordSet& stopwords);

// Multiset unigram overlap F1 over lexical_tokens. Both empty after
// filtering, or no overlap: f1 = 0.
ScoreTriple lexical_f1(std::string_view hypothesis, std::string_view reference);
ScoreTriple lexical_f1(std::string_view hypothesis, std::string_view reference,
                       const StopwordSet& stopwords);

class ScoreBackend {
public:
    virtual ~ScoreBackend() = default;
    virtual ScoreTriple score(const MetricSpec& spec, const std::string& hypothesis,
                              const std::string& reference) = 0;
};

// Routes to the in-process lexical metric or a remote scorer; remote
// results are validated and cached by content hash.
class Scorer {
public:
    Scorer(MetricSpec spec, ScoreBackend* backend, DiskCache* cache);

    ScoreTriple score(const std::string& hypothesis, const std::string& reference);

    // Mean f1 of the hypothesis against each reference. refs must be nonempty.
    double score_against_refs(const std::string& hypothesis,
                              const std::vector<std::string>& refs);

    const MetricSpec& spec() const { return spec_; }

private:
    ScoreTriple remote_score(const std::string& hypothesis, const std::string& reference);

    MetricSpec spec_;
    ScoreBackend* backend_;
    DiskCache* cache_;
};

}  // namespace raglen

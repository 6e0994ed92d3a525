#include "raglen/silver.hpp"

#include <algorithm>

#include "json.hpp"
#include "raglen/errors.hpp"

namespace raglen {

void validate_panel(const PanelConfig& panel) {
    if (panel.systems.empty()) throw ValidationError("panel has no systems");
    if (panel.mode == PanelMode::single && panel.systems.size() != 1) {
        throw ValidationError("single panel mode requires exactly one system");
    }
    if (panel.samples_per_system < 1) {
        throw ValidationError("samples_per_system must be >= 1");
    }
    if (panel.top_m < 1) throw ValidationError("top_m must be >= 1");
    const long long pool =
        static_cast<long long>(panel.systems.size()) * panel.samples_per_system;
    if (panel.top_m > pool) {
        throw ValidationError("top_m " + std::to_string(panel.top_m) +
                              " exceeds the panel pool of " + std::to_string(pool));
    }
    for (const auto& system : panel.systems) validate_system(system);
}

std::string candidate_key(const std::string& system_id, long long sample_idx) {
    return system_id + "#" + std::to_string(sample_idx);
}

PoolBuildResult build_pool(const PanelConfig& panel, const std::vector<Example>& subset,
                           const TokenBudget& budget, const SummaryBudget& summary_budget,
                           ChatBackend* backend, DiskCache* cache) {
    validate_panel(panel);
    if (subset.empty()) throw ValidationError("cannot build a pool over an empty subset");

    // One full-context run per system, each at its own supported cap.
    std::vector<std::map<std::string, std::vector<CandidateSummary>>> per_system;
    per_system.reserve(panel.systems.size());
    for (const auto& system : panel.systems) {
        SystemConfig config = system;
        config.n_samples = panel.samples_per_system;
        GenerationRun run =
            run_full_context(config, subset, budget, summary_budget, backend, cache);
        std::map<std::string, std::vector<CandidateSummary>> by_example;
        for (auto& candidate : run.candidates) {
            by_example[candidate.example_id].push_back(std::move(candidate));
        }
        per_system.push_back(std::move(by_example));
    }

    PoolBuildResult result;
    for (const auto& example : subset) {
        std::vector<CandidateSummary> pool;
        bool complete = true;
        for (const auto& by_example : per_system) {
            auto it = by_example.find(example.example_id);
            if (it == by_example.end() ||
                it->second.size() != static_cast<std::size_t>(panel.samples_per_system)) {
                complete = false;
                break;
            }
            pool.insert(pool.end(), it->second.begin(), it->second.end());
        }
        if (complete) {
            result.pools.emplace(example.example_id, std::move(pool));
        } else {
            log_warn("example '" + example.example_id +
                     "' excluded from the silver pool: a panel system failed");
            result.excluded_examples.push_back(example.example_id);
        }
    }
    return result;
}

UtilityMatrix utility_matrix(const std::vector<CandidateSummary>& candidates, Scorer& scorer) {
    const std::size_t n = candidates.size();
    if (n < 2) throw ValidationError("utility matrix needs at least 2 candidates");

    UtilityMatrix matrix;
    matrix.candidate_ids.reserve(n);
    for (const auto& c : candidates) {
        matrix.candidate_ids.push_back(candidate_key(c.system_id, c.sample_idx));
    }
    matrix.values.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double u = (scorer.score(candidates[i].text, candidates[j].text).f1 +
                        scorer.score(candidates[j].text, candidates[i].text).f1) /
                       2.0;
            matrix.values[i][j] = u;
            matrix.values[j][i] = u;
        }
    }
    return matrix;
}

std::vector<double> mbr_scores(const UtilityMatrix& matrix) {
    const std::size_t n = matrix.values.size();
    std::vector<double> scores(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sum += matrix.values[i][j];
        }
        scores[i] = sum / static_cast<double>(n - 1);
    }
    return scores;
}

SilverReferenceSet mbr_select_top(const std::vector<CandidateSummary>& candidates,
                                  Scorer& scorer, long long m) {
    if (m < 1) throw ValidationError("mbr_select_top: m must be >= 1");
    if (candidates.size() < static_cast<std::size_t>(m)) {
        throw ValidationError("mbr_select_top: m " + std::to_string(m) +
                              " exceeds the pool of " + std::to_string(candidates.size()));
    }
    for (const auto& c : candidates) {
        if (c.example_id != candidates.front().example_id) {
            throw ValidationError("mbr_select_top: pool mixes examples '" +
                                  candidates.front().example_id + "' and '" + c.example_id +
                                  "'");
        }
    }
    bool any_nonempty = false;
    for (const auto& c : candidates) any_nonempty = any_nonempty || !c.text.empty();
    if (!any_nonempty) {
        throw ValidationError("mbr_select_top: every candidate for example '" +
                              candidates.front().example_id + "' is empty");
    }

    UtilityMatrix matrix = utility_matrix(candidates, scorer);
    std::vector<double> scores = mbr_scores(matrix);

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (candidates[a].system_id != candidates[b].system_id) {
            return candidates[a].system_id < candidates[b].system_id;
        }
        return candidates[a].sample_idx < candidates[b].sample_idx;
    });

    SilverReferenceSet set;
    set.example_id = candidates.front().example_id;
    set.pool_size = static_cast<long long>(candidates.size());
    for (long long k = 0; k < m; ++k) {
        const CandidateSummary& c = candidates[order[static_cast<std::size_t>(k)]];
        SilverRef ref;
        ref.candidate_id = candidate_key(c.system_id, c.sample_idx);
        ref.system_id = c.system_id;
        ref.text = c.text;
        ref.mbr_score = scores[order[static_cast<std::size_t>(k)]];
        set.refs.push_back(std::move(ref));
    }
    return set;
}

SilverBuildResult build_silver(const PanelConfig& panel, const std::vector<Example>& subset,
                               const TokenBudget& budget, const SummaryBudget& summary_budget,
                               Scorer& scorer, ChatBackend* backend, DiskCache* cache) {
    validate_panel(panel);
    PoolBuildResult pools = build_pool(panel, subset, budget, summary_budget, backend, cache);

    const bool pass_through =
        panel.mode == PanelMode::single && panel.samples_per_system == panel.top_m;

    SilverBuildResult result;
    result.excluded_examples = pools.excluded_examples;
    for (const auto& example : subset) {
        auto it = pools.pools.find(example.example_id);
        if (it == pools.pools.end()) continue;
        if (pass_through) {
            // The single system's samples are the references directly.
            SilverReferenceSet set;
            set.example_id = example.example_id;
            set.pool_size = static_cast<long long>(it->second.size());
            for (const auto& c : it->second) {
                SilverRef ref;
                ref.candidate_id = candidate_key(c.system_id, c.sample_idx);
                ref.system_id = c.system_id;
                ref.text = c.text;
                ref.mbr_score = 0.0;
                set.refs.push_back(std::move(ref));
            }
            result.sets.push_back(std::move(set));
        } else {
            result.sets.push_back(mbr_select_top(it->second, scorer, panel.top_m));
        }
    }
    return result;
}

PoolProvenance pool_provenance(const std::vector<SilverReferenceSet>& silver) {
    if (silver.empty()) throw ValidationError("pool_provenance: no silver sets");
    PoolProvenance provenance;
    for (const auto& set : silver) {
        for (const auto& ref : set.refs) {
            ++provenance.counts[ref.system_id];
            ++provenance.total;
        }
    }
    return provenance;
}

std::string silver_to_jsonl(const std::vector<SilverReferenceSet>& silver) {
    std::string out;
    for (const auto& set : silver) {
        nlohmann::json refs = nlohmann::json::array();
        for (const auto& ref : set.refs) {
            refs.push_back({{"candidate_id", ref.candidate_id},
                            {"system_id", ref.system_id},
                            {"text", ref.text},
                            {"mbr_score", ref.mbr_score}});
        }
        nlohmann::json record{
            {"example_id", set.example_id}, {"refs", refs}, {"pool_size", set.pool_size}};
        out += record.dump();
        out += "\n";
    }
    return out;
}

std::vector<SilverReferenceSet> silver_from_jsonl(const std::string& text) {
    std::vector<SilverReferenceSet> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;

        auto parsed = nlohmann::json::parse(line, nullptr, false);
        if (!parsed.is_object() || !parsed.contains("example_id") ||
            !parsed.contains("refs") || !parsed.contains("pool_size") ||
            !parsed["refs"].is_array()) {
            throw ValidationError("silver line " + std::to_string(line_no) +
                                  ": malformed record");
        }
        SilverReferenceSet set;
        set.example_id = parsed["example_id"].get<std::string>();
        set.pool_size = parsed["pool_size"].get<long long>();
        for (const auto& r : parsed["refs"]) {
            if (!r.is_object() || !r.contains("candidate_id") || !r.contains("system_id") ||
                !r.contains("text") || !r.contains("mbr_score")) {
                throw ValidationError("silver line " + std::to_string(line_no) +
                                      ": malformed ref");
            }
            SilverRef ref;
            ref.candidate_id = r["candidate_id"].get<std::string>();
            ref.system_id = r["system_id"].get<std::string>();
            ref.text = r["text"].get<std::string>();
            ref.mbr_score = r["mbr_score"].get<double>();
            set.refs.push_back(std::move(ref));
        }
        if (set.refs.empty()) {
            throw ValidationError("silver line " + std::to_string(line_no) + ": no refs");
        }
        out.push_back(std::move(set));
    }
    return out;
}

std::string provenance_table(const PoolProvenance& provenance) {
    std::string out = "system_id\tcount\n";
    for (const auto& [system_id, count] : provenance.counts) {
        out += system_id + "\t" + std::to_string(count) + "\n";
    }
    out += "total\t" + std::to_string(provenance.total) + "\n";
    return out;
}

}  // namespace raglen

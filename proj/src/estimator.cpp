#include "raglen/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "raglen/cache.hpp"
#include "raglen/errors.hpp"
#include "raglen/parallel.hpp"

namespace raglen {

namespace {

double mean_of(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values, double mean) {
    if (values.size() < 2) return 0.0;
    double sum_sq = 0.0;
    for (double v : values) sum_sq += (v - mean) * (v - mean);
    return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

struct LengthScores {
    std::vector<double> run_scores;
    long long examples_scored = 0;
};

// Runs the RAG path at one length over every example and aggregates
// per-sample-index run means. Failed examples are dropped pairwise.
std::optional<LengthScores> score_at_length(
    const SystemConfig& system, const std::vector<Example>& examples,
    const std::vector<RetrievalRanking>& rankings,
    const std::vector<const std::vector<std::string>*>& refs, long long length,
    Scorer& scorer, const SummaryBudget& summary_budget, ChatBackend* chat, DiskCache* cache,
    const char* stage) {
    const std::size_t n_samples = static_cast<std::size_t>(system.n_samples);

    struct Slot {
        std::optional<std::vector<double>> scores;
    };
    std::vector<Slot> slots(examples.size());

    parallel_for(examples.size(), static_cast<std::size_t>(system.max_in_flight),
                 [&](std::size_t i) {
                     try {
                         auto candidates = run_rag(system, rankings[i], examples[i],
                                                   TokenBudget{length}, summary_budget, chat,
                                                   cache);
                         std::vector<double> scores(n_samples, 0.0);
                         for (const auto& candidate : candidates) {
                             scores[static_cast<std::size_t>(candidate.sample_idx)] =
                                 scorer.score_against_refs(candidate.text, *refs[i]);
                         }
                         slots[i].scores = std::move(scores);
                     } catch (const std::runtime_error& e) {
                         log_warn(std::string(stage) + ": example '" +
                                  examples[i].example_id + "' failed at length " +
                                  std::to_string(length) + ": " + e.what());
                     }
                 });

    LengthScores out;
    out.run_scores.assign(n_samples, 0.0);
    for (const auto& slot : slots) {
        if (!slot.scores) continue;
        ++out.examples_scored;
        for (std::size_t s = 0; s < n_samples; ++s) out.run_scores[s] += (*slot.scores)[s];
    }
    if (out.examples_scored == 0) return std::nullopt;
    for (auto& v : out.run_scores) v /= static_cast<double>(out.examples_scored);
    return out;
}

std::vector<RetrievalRanking> rank_all(const RetrieverConfig& retriever,
                                       const std::vector<Example>& examples,
                                       EmbeddingBackend* embedder, DiskCache* cache) {
    EmbeddingClient client(retriever, embedder, cache);
    std::vector<RetrievalRanking> rankings;
    rankings.reserve(examples.size());
    for (const auto& example : examples) rankings.push_back(rank_example(client, example));
    return rankings;
}

SweepPoint to_point(long long length, const LengthScores& scores) {
    SweepPoint point;
    point.length = length;
    point.run_scores = scores.run_scores;
    point.mean = mean_of(point.run_scores);
    point.std_dev = sample_std(point.run_scores, point.mean);
    point.examples_scored = scores.examples_scored;
    return point;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::optional<long long> parse_cell(const std::string& cell, const std::string& model,
                                    const char* column) {
    if (cell.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        long long v = std::stoll(cell, &used);
        if (used != cell.size() || v < 1) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("baselines row '" + model + "': bad " + column + " value '" +
                              cell + "'");
    }
}

}  // namespace

std::vector<long long> make_grid(const LengthGrid& grid) {
    if (grid.start < 1) throw ValidationError("grid start must be >= 1");
    if (grid.step < 1) throw ValidationError("grid step must be >= 1");
    if (grid.start > grid.stop) throw ValidationError("grid start exceeds stop");
    if ((grid.stop - grid.start) % grid.step != 0) {
        throw ValidationError("grid step does not divide stop - start");
    }
    std::vector<long long> lengths;
    for (long long v = grid.start; v <= grid.stop; v += grid.step) lengths.push_back(v);
    return lengths;
}

std::vector<SweepPoint> sweep(const SystemConfig& system, const RetrieverConfig& retriever,
                              const std::vector<SilverReferenceSet>& silver,
                              const std::vector<Example>& subset,
                              const std::vector<long long>& grid, Scorer& scorer,
                              const SummaryBudget& summary_budget, ChatBackend* chat,
                              EmbeddingBackend* embedder, DiskCache* cache) {
    validate_system(system);
    if (subset.empty()) throw ValidationError("sweep: subset is empty");
    if (grid.empty()) throw ValidationError("sweep: grid is empty");

    std::map<std::string, std::vector<std::string>> silver_texts;
    for (const auto& set : silver) {
        std::vector<std::string> texts;
        for (const auto& ref : set.refs) texts.push_back(ref.text);
        silver_texts.emplace(set.example_id, std::move(texts));
    }
    std::vector<const std::vector<std::string>*> refs;
    refs.reserve(subset.size());
    for (const auto& example : subset) {
        auto it = silver_texts.find(example.example_id);
        if (it == silver_texts.end() || it->second.empty()) {
            throw ValidationError("sweep: no silver references for example '" +
                                  example.example_id + "'");
        }
        refs.push_back(&it->second);
    }

    const long long usable = system.supported_context - system.max_output_tokens;
    std::vector<long long> feasible;
    for (long long length : grid) {
        if (length <= usable) {
            feasible.push_back(length);
        } else {
            log_warn("sweep: dropping grid length " + std::to_string(length) +
                     " above the usable window " + std::to_string(usable) + " of system '" +
                     system.system_id + "'");
        }
    }
    if (feasible.empty()) {
        throw ValidationError("sweep: every grid length exceeds the usable window of system '" +
                              system.system_id + "'");
    }

    auto rankings = rank_all(retriever, subset, embedder, cache);

    std::vector<SweepPoint> points;
    for (long long length : feasible) {
        auto scores = score_at_length(system, subset, rankings, refs, length, scorer,
                                      summary_budget, chat, cache, "sweep");
        if (!scores) {
            log_warn("sweep: omitting length " + std::to_string(length) +
                     ": every example failed");
            continue;
        }
        points.push_back(to_point(length, *scores));
    }
    // A configured one-point grid is legitimate; losing points to failures
    // down to a single survivor is not.
    if (points.size() < 2 && points.size() < feasible.size()) {
        throw ValidationError("sweep: only " + std::to_string(points.size()) + " of " +
                              std::to_string(feasible.size()) + " grid points produced scores");
    }
    return points;
}

LengthEstimate select_length(const std::vector<SweepPoint>& points) {
    if (points.empty()) throw ValidationError("select_length: empty sweep");

    std::vector<SweepPoint> sorted = points;
    std::sort(sorted.begin(), sorted.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.length < b.length; });

    std::size_t best = 0;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].mean > sorted[best].mean) best = i;
    }
    const double threshold = sorted[best].mean - sorted[best].std_dev;

    std::size_t chosen = best;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].mean >= threshold) {
            chosen = i;
            break;
        }
    }

    LengthEstimate estimate;
    estimate.chosen_length = sorted[chosen].length;
    estimate.argmax_length = sorted[best].length;
    estimate.threshold = threshold;
    estimate.sweep = std::move(sorted);

    if (estimate.chosen_length > estimate.argmax_length) {
        throw ValidationError("select_length: postcondition violated");
    }
    return estimate;
}

EvalResult evaluate_at_length(const SystemConfig& system, const RetrieverConfig& retriever,
                              const std::vector<Example>& dataset, long long length,
                              const std::map<std::string, std::vector<std::string>>& references,
                              Scorer& scorer, const SummaryBudget& summary_budget,
                              ChatBackend* chat, EmbeddingBackend* embedder, DiskCache* cache) {
    validate_system(system);
    if (dataset.empty()) throw ValidationError("evaluate_at_length: dataset is empty");
    const long long usable = system.supported_context - system.max_output_tokens;
    if (length < 1 || length > usable) {
        throw ValidationError("evaluate_at_length: length " + std::to_string(length) +
                              " outside (0, " + std::to_string(usable) + "]");
    }

    std::vector<const std::vector<std::string>*> refs;
    refs.reserve(dataset.size());
    for (const auto& example : dataset) {
        auto it = references.find(example.example_id);
        if (it == references.end() || it->second.empty()) {
            throw ValidationError("evaluate_at_length: no references for example '" +
                                  example.example_id + "'");
        }
        refs.push_back(&it->second);
    }

    auto rankings = rank_all(retriever, dataset, embedder, cache);
    auto scores = score_at_length(system, dataset, rankings, refs, length, scorer,
                                  summary_budget, chat, cache, "evaluate");
    if (!scores) {
        throw ValidationError("evaluate_at_length: every example failed at length " +
                              std::to_string(length));
    }

    EvalResult result;
    result.run_scores = scores->run_scores;
    result.mean = mean_of(result.run_scores);
    result.std_dev = sample_std(result.run_scores, result.mean);
    result.examples_scored = scores->examples_scored;
    return result;
}

BaselineTable load_baselines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open baselines file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("baselines file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "model_id,supported,ruler,helmet_summ,helmet_longqa") {
        throw ValidationError("baselines file '" + path + "': unexpected header '" + line + "'");
    }

    BaselineTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw ValidationError("baselines line " + std::to_string(line_no) + ": expected 5 fields");
        }
        const std::string& model = fields[0];
        if (model.empty()) {
            throw ValidationError("baselines line " + std::to_string(line_no) + ": empty model_id");
        }
        if (table.count(model)) {
            throw ValidationError("baselines line " + std::to_string(line_no) +
                                  ": duplicate model '" + model + "'");
        }
        BaselineFileRow row;
        auto supported = parse_cell(fields[1], model, "supported");
        if (!supported) {
            throw ValidationError("baselines row '" + model + "': supported is required");
        }
        row.supported = *supported;
        row.ruler = parse_cell(fields[2], model, "ruler");
        row.helmet_summ = parse_cell(fields[3], model, "helmet_summ");
        row.helmet_longqa = parse_cell(fields[4], model, "helmet_longqa");
        for (const auto* est : {&row.ruler, &row.helmet_summ, &row.helmet_longqa}) {
            if (*est && **est > row.supported) {
                throw ValidationError("baselines row '" + model +
                                      "': estimate exceeds supported context");
            }
        }
        table.emplace(model, row);
    }
    return table;
}

BaselineEstimates baselines_for(const BaselineTable& table, const std::string& model_id,
                                long long supported_context, const TokenBudget& input_cap) {
    BaselineEstimates estimates;
    estimates.full_context = std::min(supported_context, input_cap.max_tokens);
    auto it = table.find(model_id);
    if (it != table.end()) {
        estimates.ruler = it->second.ruler;
        estimates.helmet_summ = it->second.helmet_summ;
        estimates.helmet_longqa = it->second.helmet_longqa;
    }
    return estimates;
}

std::vector<ComparisonRow> compare_baselines(
    const SystemConfig& system, const RetrieverConfig& retriever,
    const std::vector<Example>& dataset,
    const std::map<std::string, std::vector<std::string>>& references,
    const BaselineEstimates& baselines, long long ours_length, Scorer& scorer,
    const SummaryBudget& summary_budget, ChatBackend* chat, EmbeddingBackend* embedder,
    DiskCache* cache) {
    const long long usable = system.supported_context - system.max_output_tokens;

    std::vector<std::pair<std::string, long long>> requested;
    requested.emplace_back("full-context", baselines.full_context);
    if (baselines.ruler) requested.emplace_back("RULER", *baselines.ruler);
    if (baselines.helmet_summ) requested.emplace_back("HELMET-Summ", *baselines.helmet_summ);
    if (baselines.helmet_longqa) {
        requested.emplace_back("HELMET-LongQA", *baselines.helmet_longqa);
    }
    requested.emplace_back("Ours", ours_length);

    std::vector<ComparisonRow> rows;
    for (const auto& [method, want] : requested) {
        long long length = want;
        bool clamped = false;
        if (length > usable) {
            length = usable;
            clamped = true;
            log_warn("comparison row '" + method + "' clamped from " + std::to_string(want) +
                     " to the usable window " + std::to_string(usable));
        }
        EvalResult eval = evaluate_at_length(system, retriever, dataset, length, references,
                                             scorer, summary_budget, chat, embedder, cache);
        ComparisonRow row;
        row.method = method;
        row.length = length;
        row.clamped = clamped;
        row.mean = eval.mean;
        row.std_dev = eval.std_dev;
        row.examples_scored = eval.examples_scored;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace raglen

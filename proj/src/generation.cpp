#include "raglen/generation.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>

#include "raglen/cache.hpp"
#include "raglen/errors.hpp"
#include "raglen/hash.hpp"
#include "raglen/parallel.hpp"

namespace raglen {

namespace {

const char* const kInstructions =
    "Answer the question based on the provided document.\n"
    "Be concise and directly address only the specific question asked.\n"
    "Limit your response to a maximum of ";

std::string format_temperature(double t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", t);
    return buf;
}

std::string instruction_block(const std::string& question, long long num_words) {
    return "Question: " + question + "\n\n" + kInstructions + std::to_string(num_words) +
           " words.";
}

}  // namespace

void validate_system(const SystemConfig& config) {
    if (config.system_id.empty()) throw ValidationError("system_id is empty");
    if (config.model_id.empty()) {
        throw ValidationError("system '" + config.system_id + "': model_id is empty");
    }
    if (config.temperature < 0.0) {
        throw ValidationError("system '" + config.system_id + "': temperature must be >= 0");
    }
    if (config.n_samples < 1) {
        throw ValidationError("system '" + config.system_id + "': n_samples must be >= 1");
    }
    if (config.max_output_tokens < 1) {
        throw ValidationError("system '" + config.system_id +
                              "': max_output_tokens must be >= 1");
    }
    if (config.supported_context < 1024) {
        throw ValidationError("system '" + config.system_id +
                              "': supported_context must be >= 1024");
    }
    if (config.supported_context <= config.max_output_tokens) {
        throw ValidationError("system '" + config.system_id +
                              "': supported_context leaves no room for input");
    }
    if (config.max_in_flight < 1) {
        throw ValidationError("system '" + config.system_id + "': max_in_flight must be >= 1");
    }
    if (config.tokenizer.word_to_token_ratio <= 0.0) {
        throw ValidationError("system '" + config.system_id +
                              "': word_to_token_ratio must be > 0");
    }
}

std::string build_prompt(const std::vector<Document>& documents, const std::string& question,
                         long long num_words) {
    if (documents.empty()) throw ValidationError("build_prompt: no documents");
    if (num_words < 1) throw ValidationError("build_prompt: num_words must be >= 1");

    std::string prompt;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (i > 0) prompt += "\n\n";
        if (documents[i].title && !documents[i].title->empty()) {
            prompt += *documents[i].title;
            prompt += "\n";
        }
        prompt += documents[i].text;
    }
    prompt += "\n\n";
    prompt += instruction_block(question, num_words);
    return prompt;
}

long long prompt_overhead_tokens(const Example& example, long long num_words,
                                 const TokenizerSpec& tokenizer) {
    long long tokens = count_tokens(instruction_block(example.query, num_words), tokenizer);
    for (const auto& doc : example.documents) {
        if (doc.title && !doc.title->empty()) tokens += count_tokens(*doc.title, tokenizer);
    }
    return tokens;
}

GenerationClient::GenerationClient(SystemConfig config, ChatBackend* backend, DiskCache* cache)
    : config_(std::move(config)), backend_(backend), cache_(cache) {
    validate_system(config_);
    if (backend_ == nullptr) throw ValidationError("chat backend is null");
}

long long GenerationClient::usable_context() const {
    return config_.supported_context - config_.max_output_tokens;
}

std::vector<CandidateSummary> GenerationClient::generate(const std::string& prompt,
                                                         const SummaryBudget& budget,
                                                         const std::string& example_id,
                                                         long long context_length_used) {
    const long long prompt_tokens = count_tokens(prompt, config_.tokenizer);
    if (prompt_tokens > usable_context()) {
        throw ValidationError("prompt of " + std::to_string(prompt_tokens) +
                              " tokens exceeds the usable window " +
                              std::to_string(usable_context()) + " of system '" +
                              config_.system_id + "'");
    }

    // max_tokens and temperature are folded into the hashed material so the
    // path stays <model>/<prompt-hash>/<sample_idx>.
    std::string material = "model=" + config_.model_id +
                           "\ntemperature=" + format_temperature(config_.temperature) +
                           "\nmax_tokens=" + std::to_string(budget.max_output_tokens) + "\n" +
                           prompt;
    const std::string prefix =
        "gen/" + fs_sanitize(config_.model_id) + "/" + sha256_hex(material) + "/";

    std::vector<CandidateSummary> out;
    out.reserve(static_cast<std::size_t>(config_.n_samples));
    for (long long idx = 0; idx < config_.n_samples; ++idx) {
        const std::string key = prefix + std::to_string(idx) + ".txt";
        std::string text;
        bool cached = false;
        if (cache_ != nullptr) {
            if (auto hit = cache_->get(key)) {
                text = std::move(*hit);
                cached = true;
            }
        }
        if (!cached) {
            ChatRequest request;
            request.endpoint = config_.endpoint;
            request.model_id = config_.model_id;
            request.prompt = prompt;
            request.temperature = config_.temperature;
            request.max_tokens = budget.max_output_tokens;
            request.seed = config_.seed_base + idx;
            text = backend_->complete(request);
            if (text.empty()) {
                log_warn("empty completion from '" + config_.system_id + "' for example '" +
                         example_id + "' sample " + std::to_string(idx));
            }
            if (cache_ != nullptr) cache_->put(key, text);
        }

        CandidateSummary candidate;
        candidate.example_id = example_id;
        candidate.system_id = config_.system_id;
        candidate.sample_idx = idx;
        candidate.text = std::move(text);
        candidate.context_length_used = context_length_used;
        out.push_back(std::move(candidate));
    }
    return out;
}

GenerationRun run_full_context(const SystemConfig& system, const std::vector<Example>& dataset,
                               const TokenBudget& budget, const SummaryBudget& summary_budget,
                               ChatBackend* backend, DiskCache* cache) {
    GenerationClient client(system, backend, cache);
    const long long cap = std::min(budget.max_tokens, client.usable_context());
    if (cap < 1) throw ValidationError("full-context cap is below 1 token");

    struct Slot {
        std::vector<CandidateSummary> candidates;
        std::optional<GenerationFailure> failure;
    };
    std::vector<Slot> slots(dataset.size());

    parallel_for(dataset.size(), static_cast<std::size_t>(system.max_in_flight),
                 [&](std::size_t i) {
                     const Example& example = dataset[i];
                     try {
                         const long long overhead = prompt_overhead_tokens(
                             example, summary_budget.num_words, system.tokenizer);
                         const long long doc_budget = cap - overhead;
                         if (doc_budget < 1) {
                             throw ValidationError("window too small for any document content");
                         }
                         auto truncated = truncate_longest_first(example, TokenBudget{doc_budget},
                                                                 system.tokenizer);
                         std::string prompt =
                             build_prompt(truncated.example.documents, example.query,
                                          summary_budget.num_words);
                         slots[i].candidates =
                             client.generate(prompt, summary_budget, example.example_id, cap);
                     } catch (const std::runtime_error& e) {
                         slots[i].failure =
                             GenerationFailure{example.example_id, e.what()};
                     }
                 });

    GenerationRun run;
    for (auto& slot : slots) {
        if (slot.failure) {
            log_warn("full-context generation failed for example '" + slot.failure->example_id +
                     "': " + slot.failure->message);
            run.failures.push_back(std::move(*slot.failure));
        } else {
            for (auto& c : slot.candidates) run.candidates.push_back(std::move(c));
        }
    }
    std::sort(run.candidates.begin(), run.candidates.end(),
              [](const CandidateSummary& a, const CandidateSummary& b) {
                  if (a.example_id != b.example_id) return a.example_id < b.example_id;
                  return a.sample_idx < b.sample_idx;
              });
    return run;
}

std::vector<CandidateSummary> run_rag(const SystemConfig& system,
                                      const RetrievalRanking& ranking, const Example& example,
                                      const TokenBudget& length,
                                      const SummaryBudget& summary_budget, ChatBackend* backend,
                                      DiskCache* cache) {
    GenerationClient client(system, backend, cache);
    if (length.max_tokens > client.usable_context()) {
        throw ValidationError("length " + std::to_string(length.max_tokens) +
                              " exceeds the usable window " +
                              std::to_string(client.usable_context()) + " of system '" +
                              system.system_id + "'");
    }

    PackResult pack = pack_context(example, ranking, length, system.tokenizer);

    std::vector<Document> docs;
    docs.reserve(pack.doc_ids.size());
    for (const auto& id : pack.doc_ids) {
        for (const auto& doc : example.documents) {
            if (doc.doc_id != id) continue;
            Document copy = doc;
            if (pack.head_truncated_to) {
                long long words = max_words_for_tokens(length.max_tokens, system.tokenizer);
                if (words < 1) {
                    throw ValidationError("length " + std::to_string(length.max_tokens) +
                                          " cannot hold any document content");
                }
                copy.text = std::string(prefix_words(copy.text, words));
                copy.cached_token_count.reset();
            }
            docs.push_back(std::move(copy));
            break;
        }
    }

    std::string prompt = build_prompt(docs, example.query, summary_budget.num_words);
    return client.generate(prompt, summary_budget, example.example_id, length.max_tokens);
}

}  // namespace raglen

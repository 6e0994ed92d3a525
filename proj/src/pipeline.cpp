#include "raglen/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "raglen/cache.hpp"
#include "raglen/errors.hpp"
#include "raglen/hash.hpp"
#include "raglen/http_backends.hpp"

namespace raglen {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "raglen 0.1.0";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ValidationError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

std::string now_iso8601() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt8(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.8f", v);
    return buf;
}

// Exclusive ownership of a run directory for one command invocation.
class LockFile {
public:
    explicit LockFile(const fs::path& path) : path_(path) {
        fd_ = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST) {
                throw ValidationError("another invocation holds '" + path.string() +
                                      "'; remove the stale lock if no process is running");
            }
            throw ValidationError("cannot create lock '" + path.string() + "'");
        }
        std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] ssize_t n = ::write(fd_, pid.data(), pid.size());
    }
    ~LockFile() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

// --- config parsing ------------------------------------------------------

const nlohmann::json* find_key(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
        }
    }
}

std::string req_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    const nlohmann::json* v = find_key(obj, key);
    if (v == nullptr) throw ValidationError("config: " + where + key + " is required");
    if (!v->is_string()) throw ValidationError("config: " + where + key + " must be a string");
    return v->get<std::string>();
}

std::string opt_string(const nlohmann::json& obj, const char* key, const std::string& where,
                       const std::string& fallback) {
    const nlohmann::json* v = find_key(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) throw ValidationError("config: " + where + key + " must be a string");
    return v->get<std::string>();
}

long long req_int(const nlohmann::json& obj, const char* key, const std::string& where) {
    const nlohmann::json* v = find_key(obj, key);
    if (v == nullptr) throw ValidationError("config: " + where + key + " is required");
    if (!v->is_number_integer()) {
        throw ValidationError("config: " + where + key + " must be an integer");
    }
    return v->get<long long>();
}

long long opt_int(const nlohmann::json& obj, const char* key, const std::string& where,
                  long long fallback) {
    const nlohmann::json* v = find_key(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer()) {
        throw ValidationError("config: " + where + key + " must be an integer");
    }
    return v->get<long long>();
}

double opt_double(const nlohmann::json& obj, const char* key, const std::string& where,
                  double fallback) {
    const nlohmann::json* v = find_key(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) throw ValidationError("config: " + where + key + " must be a number");
    return v->get<double>();
}

bool opt_bool(const nlohmann::json& obj, const char* key, const std::string& where,
              bool fallback) {
    const nlohmann::json* v = find_key(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) throw ValidationError("config: " + where + key + " must be a boolean");
    return v->get<bool>();
}

TokenizerSpec parse_tokenizer(const nlohmann::json& obj, const std::string& where) {
    TokenizerSpec spec;
    const nlohmann::json* t = find_key(obj, "tokenizer");
    if (t == nullptr) return spec;
    if (!t->is_object()) throw ValidationError("config: " + where + "tokenizer must be an object");
    check_keys(*t, {"name", "word_to_token_ratio"}, where + "tokenizer");
    spec.name = opt_string(*t, "name", where + "tokenizer.", spec.name);
    spec.word_to_token_ratio =
        opt_double(*t, "word_to_token_ratio", where + "tokenizer.", spec.word_to_token_ratio);
    if (spec.word_to_token_ratio <= 0.0) {
        throw ValidationError("config: " + where + "tokenizer.word_to_token_ratio must be > 0");
    }
    return spec;
}

SystemConfig parse_system(const nlohmann::json& obj, const std::string& where) {
    if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
    check_keys(obj,
               {"system_id", "endpoint", "model_id", "temperature", "n_samples",
                "max_output_tokens", "supported_context", "seed_base", "tokenizer",
                "max_in_flight"},
               where);
    SystemConfig system;
    const std::string prefix = where + ".";
    system.system_id = req_string(obj, "system_id", prefix);
    system.endpoint = opt_string(obj, "endpoint", prefix, "");
    system.model_id = req_string(obj, "model_id", prefix);
    system.temperature = opt_double(obj, "temperature", prefix, system.temperature);
    system.n_samples = opt_int(obj, "n_samples", prefix, system.n_samples);
    system.max_output_tokens = opt_int(obj, "max_output_tokens", prefix, 0);
    system.supported_context = req_int(obj, "supported_context", prefix);
    system.seed_base = opt_int(obj, "seed_base", prefix, 0);
    system.max_in_flight = static_cast<int>(opt_int(obj, "max_in_flight", prefix, 4));
    system.tokenizer = parse_tokenizer(obj, prefix);
    return system;
}

RetrieverConfig parse_retriever(const nlohmann::json& obj) {
    if (!obj.is_object()) throw ValidationError("config: retriever must be an object");
    check_keys(obj, {"endpoint", "model_id", "unit_token_cap", "tokenizer", "max_in_flight"},
               "retriever");
    RetrieverConfig retriever;
    retriever.endpoint = opt_string(obj, "endpoint", "retriever.", "");
    retriever.model_id = req_string(obj, "model_id", "retriever.");
    retriever.unit_token_cap =
        opt_int(obj, "unit_token_cap", "retriever.", retriever.unit_token_cap);
    retriever.max_in_flight = static_cast<int>(opt_int(obj, "max_in_flight", "retriever.", 4));
    retriever.tokenizer = parse_tokenizer(obj, "retriever.");
    return retriever;
}

PanelConfig parse_panel(const nlohmann::json& obj) {
    if (!obj.is_object()) throw ValidationError("config: panel must be an object");
    check_keys(obj, {"mode", "samples_per_system", "top_m", "systems"}, "panel");
    PanelConfig panel;
    std::string mode = opt_string(obj, "mode", "panel.", "pooled");
    if (mode == "pooled") {
        panel.mode = PanelMode::pooled;
    } else if (mode == "single") {
        panel.mode = PanelMode::single;
    } else {
        throw ValidationError("config: panel.mode must be 'pooled' or 'single'");
    }
    panel.samples_per_system =
        opt_int(obj, "samples_per_system", "panel.", panel.samples_per_system);
    panel.top_m = opt_int(obj, "top_m", "panel.", panel.top_m);
    const nlohmann::json* systems = find_key(obj, "systems");
    if (systems == nullptr || !systems->is_array() || systems->empty()) {
        throw ValidationError("config: panel.systems must be a nonempty array");
    }
    for (std::size_t i = 0; i < systems->size(); ++i) {
        panel.systems.push_back(
            parse_system((*systems)[i], "panel.systems[" + std::to_string(i) + "]"));
    }
    return panel;
}

MetricSpec parse_metric(const nlohmann::json& obj) {
    if (!obj.is_object()) throw ValidationError("config: metric must be an object");
    check_keys(obj, {"kind", "endpoint"}, "metric");
    MetricSpec spec;
    std::string kind = opt_string(obj, "kind", "metric.", "lexical_f1");
    if (kind == "lexical_f1") {
        spec.kind = MetricKind::lexical_f1;
    } else if (kind == "remote_a3cu") {
        spec.kind = MetricKind::remote_a3cu;
    } else {
        throw ValidationError("config: metric.kind must be 'lexical_f1' or 'remote_a3cu'");
    }
    std::string endpoint = opt_string(obj, "endpoint", "metric.", "");
    if (!endpoint.empty()) spec.endpoint = endpoint;
    return spec;
}

LengthGrid parse_grid(const nlohmann::json& obj) {
    if (!obj.is_object()) throw ValidationError("config: grid must be an object");
    check_keys(obj, {"start", "stop", "step"}, "grid");
    LengthGrid grid;
    grid.start = opt_int(obj, "start", "grid.", grid.start);
    grid.stop = opt_int(obj, "stop", "grid.", grid.stop);
    grid.step = opt_int(obj, "step", "grid.", grid.step);
    return grid;
}

// Pre-resolution check: max_output_tokens may still be 0 here.
void validate_system_shape(const SystemConfig& system, bool offline) {
    SystemConfig probe = system;
    if (probe.max_output_tokens == 0) probe.max_output_tokens = 1;
    validate_system(probe);
    if (system.max_output_tokens < 0) {
        throw ValidationError("system '" + system.system_id +
                              "': max_output_tokens must be >= 0");
    }
    if (!offline) {
        if (system.endpoint.empty()) {
            throw ValidationError("system '" + system.system_id +
                                  "': endpoint is required unless offline is set");
        }
        split_url(system.endpoint);
    }
}

nlohmann::json canonical_tokenizer(const TokenizerSpec& spec) {
    return {{"name", spec.name}, {"word_to_token_ratio", spec.word_to_token_ratio}};
}

nlohmann::json canonical_system(const SystemConfig& system) {
    return {{"max_output_tokens", system.max_output_tokens},
            {"model_id", system.model_id},
            {"n_samples", system.n_samples},
            {"seed_base", system.seed_base},
            {"supported_context", system.supported_context},
            {"system_id", system.system_id},
            {"temperature", system.temperature},
            {"tokenizer", canonical_tokenizer(system.tokenizer)}};
}

nlohmann::json system_to_json(const SystemConfig& system) {
    nlohmann::json j = canonical_system(system);
    j["endpoint"] = system.endpoint;
    j["max_in_flight"] = system.max_in_flight;
    return j;
}

// Faithful reconstruction used when a RunConfig was built in code rather
// than loaded from a file.
std::string config_to_json(const RunConfig& config) {
    nlohmann::json panel_systems = nlohmann::json::array();
    for (const auto& system : config.panel.systems) {
        panel_systems.push_back(system_to_json(system));
    }
    nlohmann::json j{
        {"dataset", config.dataset_path},
        {"output_dir", config.output_dir},
        {"seed", config.seed},
        {"sample_fraction", config.sample_fraction},
        {"input_cap", config.input_cap.max_tokens},
        {"offline", config.offline},
        {"metric",
         {{"kind", config.metric.kind == MetricKind::lexical_f1 ? "lexical_f1" : "remote_a3cu"}}},
        {"grid", {{"start", config.grid.start}, {"stop", config.grid.stop}, {"step", config.grid.step}}},
        {"retriever",
         {{"endpoint", config.retriever.endpoint},
          {"model_id", config.retriever.model_id},
          {"unit_token_cap", config.retriever.unit_token_cap},
          {"max_in_flight", config.retriever.max_in_flight},
          {"tokenizer", canonical_tokenizer(config.retriever.tokenizer)}}},
        {"summarizer", system_to_json(config.summarizer)},
        {"panel",
         {{"mode", config.panel.mode == PanelMode::pooled ? "pooled" : "single"},
          {"samples_per_system", config.panel.samples_per_system},
          {"top_m", config.panel.top_m},
          {"systems", panel_systems}}},
    };
    if (config.baselines_path) j["baselines"] = *config.baselines_path;
    if (config.summary_budget_words) j["summary_budget_words"] = *config.summary_budget_words;
    if (config.metric.endpoint) j["metric"]["endpoint"] = *config.metric.endpoint;
    return j.dump(2) + "\n";
}

// --- stage plumbing -------------------------------------------------------

SystemConfig resolve_system(SystemConfig system, const SummaryBudget& budget) {
    if (system.max_output_tokens == 0) system.max_output_tokens = budget.max_output_tokens;
    validate_system(system);
    return system;
}

struct StageContext {
    std::vector<Example> dataset;
    SummaryBudget budget;
    SystemConfig summarizer;
    PanelConfig panel;
    fs::path run_dir;
    std::string cfg_hash;
    std::string data_hash;
    std::unique_ptr<DiskCache> cache;
    RunManifest manifest;
};

StageContext prepare(const RunConfig& config, bool force) {
    validate_config(config);

    StageContext ctx;
    ctx.dataset = load_dataset(config.dataset_path);
    if (ctx.dataset.empty()) {
        throw ValidationError("dataset '" + config.dataset_path + "' holds no examples");
    }

    if (config.summary_budget_words) {
        ctx.budget = make_summary_budget(*config.summary_budget_words,
                                         config.summarizer.tokenizer);
    } else {
        try {
            ctx.budget = calibrate_summary_budget(ctx.dataset, config.summarizer.tokenizer);
        } catch (const ValidationError&) {
            throw ValidationError(
                "no gold summaries to calibrate the summary budget; set "
                "summary_budget_words in the config");
        }
    }

    ctx.summarizer = resolve_system(config.summarizer, ctx.budget);
    ctx.panel = config.panel;
    for (auto& system : ctx.panel.systems) system = resolve_system(system, ctx.budget);

    ctx.cfg_hash = config_hash(config);
    ctx.data_hash = dataset_hash_of(config.dataset_path);
    ctx.run_dir = run_dir_for(config);
    fs::create_directories(ctx.run_dir);
    ctx.cache = std::make_unique<DiskCache>(fs::path(config.output_dir) / "cache");

    ctx.manifest = load_manifest(ctx.run_dir);
    if (ctx.manifest.config_hash.empty()) {
        ctx.manifest.config_hash = ctx.cfg_hash;
        ctx.manifest.dataset_hash = ctx.data_hash;
        ctx.manifest.version = kVersion;
    } else {
        if (ctx.manifest.config_hash != ctx.cfg_hash) {
            throw ValidationError("manifest in '" + ctx.run_dir.string() +
                                  "' belongs to a different config");
        }
        if (ctx.manifest.dataset_hash != ctx.data_hash) {
            if (!force) {
                throw ValidationError(
                    "dataset file changed since this run directory was created; rerun with "
                    "--force to rebuild it or point output_dir somewhere fresh");
            }
            log_warn("dataset changed; resetting all stages of run " + ctx.cfg_hash);
            ctx.manifest.dataset_hash = ctx.data_hash;
            ctx.manifest.silver = {};
            ctx.manifest.sweep = {};
            ctx.manifest.final_eval = {};
            ctx.manifest.report = {};
        }
    }
    return ctx;
}

void persist_config_copy(const RunConfig& config, const StageContext& ctx) {
    const std::string& content =
        config.raw_json.empty() ? config_to_json(config) : config.raw_json;
    write_file_atomic(ctx.run_dir / "config.json", content);
}

std::string sweep_csv(const std::vector<SweepPoint>& points, long long n_samples) {
    std::string out = "length";
    for (long long i = 1; i <= n_samples; ++i) out += ",run" + std::to_string(i);
    out += ",mean,std\n";
    for (const auto& point : points) {
        out += std::to_string(point.length);
        for (double v : point.run_scores) out += "," + fmt8(v);
        out += "," + fmt8(point.mean) + "," + fmt8(point.std_dev) + "\n";
    }
    return out;
}

std::string rows_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "method,length,clamped,mean,std,examples_scored\n";
    for (const auto& row : rows) {
        out += row.method + "," + std::to_string(row.length) + "," +
               (row.clamped ? "1" : "0") + "," + fmt8(row.mean) + "," + fmt8(row.std_dev) +
               "," + std::to_string(row.examples_scored) + "\n";
    }
    return out;
}

std::string report_text(const std::vector<ComparisonRow>& rows, long long chosen,
                        const std::string& source, std::size_t gold_count,
                        std::size_t skipped_count) {
    std::string out;
    out += "retrieval length report\n";
    out += "=======================\n";
    out += "chosen_length: " + std::to_string(chosen) + " (" + source + ")\n";
    out += "examples with gold summaries: " + std::to_string(gold_count);
    if (skipped_count > 0) {
        out += " (" + std::to_string(skipped_count) + " without gold skipped)";
    }
    out += "\n\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %10s %12s %12s %6s\n", "method", "length", "mean",
                  "std", "n");
    out += buf;
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%-14s %10lld %12.8f %12.8f %6lld\n",
                      row.method.c_str(), row.length, row.mean, row.std_dev,
                      row.examples_scored);
        out += buf;
    }
    bool first_note = true;
    for (const auto& row : rows) {
        if (!row.clamped) continue;
        if (first_note) {
            out += "\nnotes:\n";
            first_note = false;
        }
        out += "- '" + row.method + "' was clamped to the usable context window\n";
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) fields.push_back(field);
    if (!line.empty() && line.back() == sep) fields.push_back("");
    return fields;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::string text = read_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ValidationError("config '" + path + "' is not a JSON object");
    }
    check_keys(j,
               {"dataset", "output_dir", "baselines", "seed", "sample_fraction", "input_cap",
                "summary_budget_words", "retriever", "summarizer", "panel", "metric", "grid",
                "offline"},
               "the top level");

    RunConfig config;
    config.raw_json = text;
    config.dataset_path = req_string(j, "dataset", "");
    config.output_dir = req_string(j, "output_dir", "");
    config.seed = req_int(j, "seed", "");
    config.sample_fraction = opt_double(j, "sample_fraction", "", config.sample_fraction);
    config.input_cap.max_tokens = opt_int(j, "input_cap", "", config.input_cap.max_tokens);
    config.offline = opt_bool(j, "offline", "", false);
    std::string baselines = opt_string(j, "baselines", "", "");
    if (!baselines.empty()) config.baselines_path = baselines;
    if (find_key(j, "summary_budget_words") != nullptr) {
        config.summary_budget_words = req_int(j, "summary_budget_words", "");
    }

    const nlohmann::json* retriever = find_key(j, "retriever");
    if (retriever == nullptr) throw ValidationError("config: retriever is required");
    config.retriever = parse_retriever(*retriever);

    const nlohmann::json* summarizer = find_key(j, "summarizer");
    if (summarizer == nullptr) throw ValidationError("config: summarizer is required");
    config.summarizer = parse_system(*summarizer, "summarizer");

    const nlohmann::json* panel = find_key(j, "panel");
    if (panel == nullptr) throw ValidationError("config: panel is required");
    config.panel = parse_panel(*panel);

    if (const nlohmann::json* metric = find_key(j, "metric")) config.metric = parse_metric(*metric);
    if (const nlohmann::json* grid = find_key(j, "grid")) config.grid = parse_grid(*grid);

    validate_config(config);
    return config;
}

void validate_config(const RunConfig& config) {
    if (config.dataset_path.empty()) throw ValidationError("config: dataset is required");
    if (config.output_dir.empty()) throw ValidationError("config: output_dir is required");
    if (!(config.sample_fraction > 0.0) || config.sample_fraction > 1.0) {
        throw ValidationError("config: sample_fraction must be in (0, 1]");
    }
    if (config.input_cap.max_tokens < 1) throw ValidationError("config: input_cap must be >= 1");
    if (config.summary_budget_words && *config.summary_budget_words < 1) {
        throw ValidationError("config: summary_budget_words must be >= 1");
    }
    make_grid(config.grid);

    if (config.retriever.model_id.empty()) {
        throw ValidationError("config: retriever.model_id is required");
    }
    if (config.retriever.unit_token_cap < 1) {
        throw ValidationError("config: retriever.unit_token_cap must be >= 1");
    }
    if (config.retriever.max_in_flight < 1) {
        throw ValidationError("config: retriever.max_in_flight must be >= 1");
    }
    if (!config.offline) {
        if (config.retriever.endpoint.empty()) {
            throw ValidationError("config: retriever.endpoint is required unless offline is set");
        }
        split_url(config.retriever.endpoint);
    }

    validate_system_shape(config.summarizer, config.offline);

    if (config.panel.systems.empty()) throw ValidationError("config: panel has no systems");
    if (config.panel.mode == PanelMode::single && config.panel.systems.size() != 1) {
        throw ValidationError("config: single panel mode requires exactly one system");
    }
    if (config.panel.samples_per_system < 1) {
        throw ValidationError("config: panel.samples_per_system must be >= 1");
    }
    if (config.panel.top_m < 1) throw ValidationError("config: panel.top_m must be >= 1");
    const long long pool = static_cast<long long>(config.panel.systems.size()) *
                           config.panel.samples_per_system;
    if (config.panel.top_m > pool) {
        throw ValidationError("config: panel.top_m exceeds the panel pool of " +
                              std::to_string(pool));
    }
    std::set<std::string> ids;
    for (const auto& system : config.panel.systems) {
        if (!ids.insert(system.system_id).second) {
            throw ValidationError("config: duplicate panel system_id '" + system.system_id +
                                  "'");
        }
        validate_system_shape(system, config.offline);
    }

    if (config.metric.kind == MetricKind::remote_a3cu) {
        if (!config.metric.endpoint || config.metric.endpoint->empty()) {
            throw ValidationError("config: metric.endpoint is required for remote_a3cu");
        }
        if (!config.offline) split_url(*config.metric.endpoint);
    }
}

std::string config_hash(const RunConfig& config) {
    nlohmann::json panel_systems = nlohmann::json::array();
    for (const auto& system : config.panel.systems) {
        panel_systems.push_back(canonical_system(system));
    }
    nlohmann::json canon{
        {"dataset", config.dataset_path},
        {"grid", {{"start", config.grid.start}, {"stop", config.grid.stop}, {"step", config.grid.step}}},
        {"input_cap", config.input_cap.max_tokens},
        {"metric",
         {{"kind", config.metric.kind == MetricKind::lexical_f1 ? "lexical_f1" : "remote_a3cu"}}},
        {"panel",
         {{"mode", config.panel.mode == PanelMode::pooled ? "pooled" : "single"},
          {"samples_per_system", config.panel.samples_per_system},
          {"systems", panel_systems},
          {"top_m", config.panel.top_m}}},
        {"retriever",
         {{"model_id", config.retriever.model_id},
          {"tokenizer", canonical_tokenizer(config.retriever.tokenizer)},
          {"unit_token_cap", config.retriever.unit_token_cap}}},
        {"sample_fraction", config.sample_fraction},
        {"seed", config.seed},
        {"summarizer", canonical_system(config.summarizer)},
        {"summary_budget_words",
         config.summary_budget_words ? nlohmann::json(*config.summary_budget_words)
                                     : nlohmann::json(nullptr)},
    };
    return sha256_hex(canon.dump()).substr(0, 12);
}

std::string dataset_hash_of(const std::string& path) { return sha256_hex(read_file(path)); }

std::filesystem::path run_dir_for(const RunConfig& config) {
    return fs::path(config.output_dir) / config_hash(config);
}

RunManifest load_manifest(const std::filesystem::path& run_dir) {
    RunManifest manifest;
    fs::path path = run_dir / "manifest.json";
    if (!fs::exists(path)) return manifest;
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ValidationError("manifest '" + path.string() + "' is corrupt");
    }
    manifest.config_hash = j.value("config_hash", "");
    manifest.dataset_hash = j.value("dataset_hash", "");
    manifest.version = j.value("version", "");
    auto read_stage = [&](const char* name) {
        StageStatus status;
        if (j.contains("stages") && j["stages"].contains(name)) {
            const auto& s = j["stages"][name];
            status.done = s.value("done", false);
            status.completed_at = s.value("completed_at", "");
        }
        return status;
    };
    manifest.silver = read_stage("silver");
    manifest.sweep = read_stage("sweep");
    manifest.final_eval = read_stage("final");
    manifest.report = read_stage("report");
    return manifest;
}

void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest) {
    auto stage = [](const StageStatus& status) {
        return nlohmann::json{{"done", status.done}, {"completed_at", status.completed_at}};
    };
    nlohmann::json j{{"config_hash", manifest.config_hash},
                     {"dataset_hash", manifest.dataset_hash},
                     {"version", manifest.version},
                     {"stages",
                      {{"silver", stage(manifest.silver)},
                       {"sweep", stage(manifest.sweep)},
                       {"final", stage(manifest.final_eval)},
                       {"report", stage(manifest.report)}}}};
    write_file_atomic(run_dir / "manifest.json", j.dump(2) + "\n");
}

namespace {

struct OfflineChat : ChatBackend {
    std::string complete(const ChatRequest& request) override {
        throw BackendError("offline mode: generation call for model '" + request.model_id +
                           "' attempted (cold cache)");
    }
};

struct OfflineEmbed : EmbeddingBackend {
    std::vector<EmbeddingVector> embed(const RetrieverConfig& config,
                                       const std::vector<std::string>&) override {
        throw BackendError("offline mode: embedding call for model '" + config.model_id +
                           "' attempted (cold cache)");
    }
};

struct OfflineScore : ScoreBackend {
    ScoreTriple score(const MetricSpec&, const std::string&, const std::string&) override {
        throw BackendError("offline mode: metric call attempted (cold cache)");
    }
};

}  // namespace

OwnedBackends make_offline_backends() {
    OwnedBackends backends;
    backends.chat = std::make_unique<OfflineChat>();
    backends.embedder = std::make_unique<OfflineEmbed>();
    backends.scorer = std::make_unique<OfflineScore>();
    return backends;
}

void cmd_silver(const RunConfig& config, const Backends& backends, bool force) {
    StageContext ctx = prepare(config, force);
    LockFile lock(ctx.run_dir / ".lock");
    persist_config_copy(config, ctx);

    if (ctx.manifest.silver.done && !force) {
        log_warn("silver stage already complete for run " + ctx.cfg_hash + "; skipping");
        save_manifest(ctx.run_dir, ctx.manifest);
        return;
    }

    auto subset = sample_subset(ctx.dataset, config.sample_fraction, config.seed);
    Scorer scorer(config.metric, backends.scorer, ctx.cache.get());
    SilverBuildResult result = build_silver(ctx.panel, subset, config.input_cap, ctx.budget,
                                            scorer, backends.chat, ctx.cache.get());
    if (result.sets.empty()) {
        throw BackendError("silver construction excluded every subset example");
    }

    write_file_atomic(ctx.run_dir / "silver" / "silver.jsonl", silver_to_jsonl(result.sets));
    write_file_atomic(ctx.run_dir / "silver" / "provenance.tsv",
                      provenance_table(pool_provenance(result.sets)));
    if (!result.excluded_examples.empty()) {
        std::string excluded;
        for (const auto& id : result.excluded_examples) excluded += id + "\n";
        write_file_atomic(ctx.run_dir / "silver" / "excluded.txt", excluded);
    }

    ctx.manifest.silver.done = true;
    ctx.manifest.silver.completed_at = now_iso8601();
    save_manifest(ctx.run_dir, ctx.manifest);
}

void cmd_estimate(const RunConfig& config, const Backends& backends, bool force) {
    StageContext ctx = prepare(config, force);
    LockFile lock(ctx.run_dir / ".lock");
    persist_config_copy(config, ctx);

    if (!ctx.manifest.silver.done) {
        throw ValidationError("silver stage is not complete for this config; run `raglen "
                              "silver --config <file>` first");
    }
    if (ctx.manifest.sweep.done && !force) {
        log_warn("estimate stage already complete for run " + ctx.cfg_hash + "; skipping");
        save_manifest(ctx.run_dir, ctx.manifest);
        return;
    }

    auto silver = silver_from_jsonl(read_file(ctx.run_dir / "silver" / "silver.jsonl"));
    std::set<std::string> covered;
    for (const auto& set : silver) covered.insert(set.example_id);

    auto subset = sample_subset(ctx.dataset, config.sample_fraction, config.seed);
    std::vector<Example> usable;
    for (auto& example : subset) {
        if (covered.count(example.example_id)) {
            usable.push_back(std::move(example));
        } else {
            log_warn("example '" + example.example_id +
                     "' has no silver references and is skipped in the sweep");
        }
    }
    if (usable.empty()) throw ValidationError("no subset example has silver references");

    Scorer scorer(config.metric, backends.scorer, ctx.cache.get());
    auto points = sweep(ctx.summarizer, config.retriever, silver, usable,
                        make_grid(config.grid), scorer, ctx.budget, backends.chat,
                        backends.embedder, ctx.cache.get());
    LengthEstimate estimate = select_length(points);

    write_file_atomic(ctx.run_dir / "estimate" / "sweep.csv",
                      sweep_csv(estimate.sweep, ctx.summarizer.n_samples));
    nlohmann::json record{{"chosen_length", estimate.chosen_length},
                          {"argmax_length", estimate.argmax_length},
                          {"threshold", estimate.threshold},
                          {"grid", make_grid(config.grid)}};
    write_file_atomic(ctx.run_dir / "estimate" / "estimate.json", record.dump(2) + "\n");

    ctx.manifest.sweep.done = true;
    ctx.manifest.sweep.completed_at = now_iso8601();
    save_manifest(ctx.run_dir, ctx.manifest);
}

void cmd_run(const RunConfig& config, const Backends& backends,
             std::optional<long long> length_override, bool force) {
    StageContext ctx = prepare(config, force);
    LockFile lock(ctx.run_dir / ".lock");
    persist_config_copy(config, ctx);

    long long chosen = 0;
    std::string source;
    if (length_override) {
        if (*length_override < 1) throw ValidationError("--length must be >= 1");
        chosen = *length_override;
        source = "override";
    } else {
        if (!ctx.manifest.sweep.done) {
            throw ValidationError("estimate stage is not complete for this config; run "
                                  "`raglen estimate --config <file>` first or pass --length");
        }
        nlohmann::json record = nlohmann::json::parse(
            read_file(ctx.run_dir / "estimate" / "estimate.json"), nullptr, false);
        if (record.is_discarded() || !record.contains("chosen_length")) {
            throw ValidationError("estimate.json is corrupt; rerun `raglen estimate --force`");
        }
        chosen = record["chosen_length"].get<long long>();
        source = "estimate";
    }

    if (ctx.manifest.final_eval.done && !force) {
        log_warn("final stage already complete for run " + ctx.cfg_hash + "; skipping");
        save_manifest(ctx.run_dir, ctx.manifest);
        return;
    }

    std::vector<Example> with_gold;
    std::map<std::string, std::vector<std::string>> references;
    for (const auto& example : ctx.dataset) {
        if (example.gold_summary && !example.gold_summary->empty()) {
            with_gold.push_back(example);
            references[example.example_id] = {*example.gold_summary};
        }
    }
    const std::size_t skipped = ctx.dataset.size() - with_gold.size();

    if (with_gold.empty()) {
        std::string note = "retrieval length report\n=======================\n";
        note += "chosen_length: " + std::to_string(chosen) + " (" + source + ")\n";
        note += "final evaluation skipped: the dataset has no gold summaries "
                "(silver-only run)\n";
        write_file_atomic(ctx.run_dir / "final" / "report.txt", note);
        nlohmann::json results{{"chosen_length", chosen},
                               {"length_source", source},
                               {"evaluated", false},
                               {"rows", nlohmann::json::array()}};
        write_file_atomic(ctx.run_dir / "final" / "results.json", results.dump(2) + "\n");
        ctx.manifest.final_eval.done = true;
        ctx.manifest.final_eval.completed_at = now_iso8601();
        save_manifest(ctx.run_dir, ctx.manifest);
        return;
    }

    BaselineTable table;
    if (config.baselines_path) table = load_baselines(*config.baselines_path);
    BaselineEstimates estimates = baselines_for(table, ctx.summarizer.model_id,
                                                ctx.summarizer.supported_context,
                                                config.input_cap);

    Scorer scorer(config.metric, backends.scorer, ctx.cache.get());
    auto rows = compare_baselines(ctx.summarizer, config.retriever, with_gold, references,
                                  estimates, chosen, scorer, ctx.budget, backends.chat,
                                  backends.embedder, ctx.cache.get());

    write_file_atomic(ctx.run_dir / "final" / "rows.csv", rows_csv(rows));
    write_file_atomic(ctx.run_dir / "final" / "report.txt",
                      report_text(rows, chosen, source, with_gold.size(), skipped));
    nlohmann::json row_records = nlohmann::json::array();
    for (const auto& row : rows) {
        row_records.push_back({{"method", row.method},
                               {"length", row.length},
                               {"clamped", row.clamped},
                               {"mean", row.mean},
                               {"std", row.std_dev},
                               {"examples_scored", row.examples_scored}});
    }
    nlohmann::json results{{"chosen_length", chosen},
                           {"length_source", source},
                           {"evaluated", true},
                           {"gold_examples", with_gold.size()},
                           {"skipped_examples", skipped},
                           {"rows", row_records}};
    write_file_atomic(ctx.run_dir / "final" / "results.json", results.dump(2) + "\n");

    ctx.manifest.final_eval.done = true;
    ctx.manifest.final_eval.completed_at = now_iso8601();
    save_manifest(ctx.run_dir, ctx.manifest);
}

void cmd_report(const std::string& output_dir) {
    fs::path root(output_dir);
    if (!fs::exists(root)) {
        throw ValidationError("output_dir '" + output_dir + "' does not exist");
    }
    LockFile lock(root / ".report.lock");

    std::vector<fs::path> run_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            run_dirs.push_back(entry.path());
        }
    }
    std::sort(run_dirs.begin(), run_dirs.end());

    // key (retriever, summarizer, method) -> raw CSV cells
    std::map<std::array<std::string, 3>, std::array<std::string, 4>> summary;
    std::string curves = "config,retriever,summarizer,length,mean,std\n";
    bool any_curves = false;
    std::size_t contributing = 0;

    for (const auto& run_dir : run_dirs) {
        RunManifest manifest = load_manifest(run_dir);
        if (!manifest.sweep.done && !manifest.final_eval.done) continue;

        nlohmann::json cfg =
            nlohmann::json::parse(read_file(run_dir / "config.json"), nullptr, false);
        if (cfg.is_discarded() || !cfg.is_object()) {
            log_warn("skipping run '" + run_dir.filename().string() + "': config copy is corrupt");
            continue;
        }
        std::string retriever = cfg["retriever"].value("model_id", "?");
        std::string summarizer = cfg["summarizer"].value("model_id", "?");
        ++contributing;

        if (manifest.final_eval.done && fs::exists(run_dir / "final" / "rows.csv")) {
            std::istringstream in(read_file(run_dir / "final" / "rows.csv"));
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto fields = split_line(line, ',');
                if (fields.size() != 6) continue;
                summary[{retriever, summarizer, fields[0]}] = {fields[1], fields[3], fields[4],
                                                               fields[5]};
            }
        }
        if (manifest.sweep.done && fs::exists(run_dir / "estimate" / "sweep.csv")) {
            std::istringstream in(read_file(run_dir / "estimate" / "sweep.csv"));
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto fields = split_line(line, ',');
                if (fields.size() < 3) continue;
                curves += run_dir.filename().string() + "," + retriever + "," + summarizer +
                          "," + fields[0] + "," + fields[fields.size() - 2] + "," +
                          fields[fields.size() - 1] + "\n";
                any_curves = true;
            }
        }

        manifest.report.done = true;
        manifest.report.completed_at = now_iso8601();
        save_manifest(run_dir, manifest);
    }

    if (contributing == 0) {
        throw ValidationError("no completed runs under '" + output_dir + "'");
    }

    std::string table = "retriever,summarizer,method,length,mean,std,examples_scored\n";
    for (const auto& [key, cells] : summary) {
        table += key[0] + "," + key[1] + "," + key[2] + "," + cells[0] + "," + cells[1] + "," +
                 cells[2] + "," + cells[3] + "\n";
    }
    write_file_atomic(root / "report" / "summary.csv", table);
    if (any_curves) write_file_atomic(root / "report" / "curves.csv", curves);
}

}  // namespace raglen

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "raglen/errors.hpp"
#include "raglen/http_backends.hpp"
#include "raglen/pipeline.hpp"

namespace {

struct StageArgs {
    std::string config_path;
    bool offline = false;
    bool force = false;
};

void add_stage_options(CLI::App* cmd, StageArgs& args) {
    cmd->add_option("--config", args.config_path, "path to the run config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_flag("--offline", args.offline, "serve everything from the disk cache");
    cmd->add_flag("--force", args.force, "redo the stage even if the manifest marks it done");
}

raglen::OwnedBackends make_http_backends() {
    raglen::OwnedBackends backends;
    raglen::RetryPolicy policy;
    backends.chat = std::make_unique<raglen::HttpChatBackend>(policy);
    backends.embedder = std::make_unique<raglen::HttpEmbeddingBackend>(policy);
    backends.scorer = std::make_unique<raglen::HttpScoreBackend>(policy);
    return backends;
}

int run_stage(const StageArgs& args, std::optional<long long> length_override,
              void (*stage)(const raglen::RunConfig&, const raglen::Backends&, bool),
              bool is_run) {
    raglen::RunConfig config = raglen::load_run_config(args.config_path);
    config.offline = config.offline || args.offline;
    raglen::OwnedBackends owned =
        config.offline ? raglen::make_offline_backends() : make_http_backends();
    if (is_run) {
        raglen::cmd_run(config, owned.view(), length_override, args.force);
    } else {
        stage(config, owned.view(), args.force);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"estimates the retrieval context length for a RAG summarization setup"};
    app.require_subcommand(1);

    StageArgs silver_args;
    CLI::App* silver = app.add_subcommand("silver", "build silver references on the subset");
    add_stage_options(silver, silver_args);

    StageArgs estimate_args;
    CLI::App* estimate = app.add_subcommand("estimate", "sweep the length grid and pick one");
    add_stage_options(estimate, estimate_args);

    StageArgs run_args;
    long long length_override = 0;
    CLI::App* run = app.add_subcommand("run", "final evaluation against the baselines");
    add_stage_options(run, run_args);
    CLI::Option* length_opt =
        run->add_option("--length", length_override, "override the estimated length");

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "merge every run under an output dir");
    report->add_option("--output-dir", report_dir, "output_dir shared by the runs")
        ->required()
        ->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (silver->parsed()) return run_stage(silver_args, std::nullopt, raglen::cmd_silver, false);
        if (estimate->parsed()) {
            return run_stage(estimate_args, std::nullopt, raglen::cmd_estimate, false);
        }
        if (run->parsed()) {
            std::optional<long long> chosen;
            if (length_opt->count() > 0) chosen = length_override;
            return run_stage(run_args, chosen, nullptr, true);
        }
        if (report->parsed()) {
            raglen::cmd_report(report_dir);
            return 0;
        }
    } catch (const raglen::ValidationError& e) {
        std::fprintf(stderr, "raglen: %s\n", e.what());
        return 1;
    } catch (const raglen::BackendError& e) {
        std::fprintf(stderr, "raglen: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "raglen: %s\n", e.what());
        return 1;
    }
    return 0;
}

#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tfcl/cli/commands.hpp"

namespace tfcl::cli {

/// Parses argv and runs the selected command. Returns the process exit code.
inline int run_main(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"Dual-stream contrastive activity recognition", "tfcl"};
    app.require_subcommand(1);
    app.set_version_flag("--version", TFCL_VERSION);

    CommandArgs a;
    a.argv = argv;
    std::string config;
    std::vector<std::string> sets;
    unsigned jobs = 0;
    std::string checkpoint, models, out_path;
    std::size_t fold = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", sets, "override a config key, e.g. --set pretrain.tau=0.2")->take_all();
        sub->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> help{
        {"synth", "write a synthetic accelerometer corpus"},
        {"ingest", "validate a corpus and summarise its windows"},
        {"cwt", "write scalograms of selected windows"},
        {"augment-preview", "write augmented views of one window"},
        {"pretrain", "contrastive pretraining of both learners"},
        {"finetune", "fit activity heads on a pretrained checkpoint"},
        {"evaluate", "cross-validated evaluation, or score a fine-tuned checkpoint"},
        {"transfer", "pretrain on one corpus, fine-tune and evaluate on another"},
        {"export-embeddings", "write encoder features of every window"}};
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        common(sub);
        subs[name] = sub;
    }
    for (const char* name : {"finetune", "transfer", "export-embeddings"})
        subs[name]->add_option("--checkpoint", checkpoint, "checkpoint directory");
    for (const char* name : {"pretrain", "finetune", "evaluate"})
        subs[name]->add_option("--fold", fold, "fold index for single-fold commands");
    subs["evaluate"]->add_option("--models", models, "score this fine-tuned checkpoint instead of running every fold");
    subs["export-embeddings"]->add_option("--stream", a.stream, "signal or scalogram")
        ->check(CLI::IsMember({"signal", "scalogram"}));
    for (const char* name : {"synth", "export-embeddings"}) subs[name]->add_option("--out", out_path, "output file");
    for (const char* name : {"cwt", "augment-preview"}) subs[name]->add_option("--window", a.window, "window index");
    subs["cwt"]->add_option("--count", a.count, "number of windows");

    std::vector<const char*> cargv;
    for (const auto& s : argv) cargv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << TFCL_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    for (const auto& [name, sub] : subs)
        if (sub->parsed()) a.command = name;
    a.config_path = config;
    a.overrides = sets;
    if (jobs > 0) a.jobs = jobs;
    if (!checkpoint.empty()) a.checkpoint = checkpoint;
    if (!models.empty()) a.models = fs::absolute(models);
    if (!out_path.empty()) a.out = fs::absolute(out_path);
    if (auto* o = subs[a.command]->get_option_no_throw("--fold"); o && o->count() > 0) a.fold = fold;
    return run_command(a, out, err);
}

}  // namespace tfcl::cli

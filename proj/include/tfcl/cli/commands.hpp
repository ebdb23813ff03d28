#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/augment/views.hpp"
#include "tfcl/cli/config.hpp"
#include "tfcl/core/parallel.hpp"
#include "tfcl/dataio/csv.hpp"
#include "tfcl/dataio/split.hpp"
#include "tfcl/eval/experiment.hpp"
#include "tfcl/nn/checkpoint.hpp"
#include "tfcl/wavelet/export.hpp"

#ifndef TFCL_VERSION
#define TFCL_VERSION "dev"
#endif

namespace tfcl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitIo = 5;

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"synth",    "ingest",   "cwt",      "augment-preview",
                                                "pretrain", "finetune", "evaluate", "transfer",
                                                "export-embeddings"};
    return names;
}

inline int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::InvalidParams:
        case ErrorCode::InvalidRange:
        case ErrorCode::EmptyPipeline:
            return kExitConfig;
        case ErrorCode::ZeroVector:
        case ErrorCode::NonfiniteLoss:
        case ErrorCode::EmptyMatrix:
        case ErrorCode::Degenerate:
            return kExitNumeric;
        case ErrorCode::CorruptManifest:
        case ErrorCode::SizeMismatch:
        case ErrorCode::ChecksumMismatch:
        case ErrorCode::IoError:
        case ErrorCode::UnknownArch:
            return kExitIo;
        default:
            return kExitData;
    }
}

/// Parsed command line.
struct CommandArgs {
    std::string command;
    fs::path config_path;
    std::vector<std::string> overrides;
    std::optional<unsigned> jobs;
    std::optional<fs::path> checkpoint;  // overrides the config's checkpoint
    std::optional<fs::path> models;      // evaluate: a fine-tuned checkpoint
    std::optional<fs::path> out;         // synth / export-embeddings output file
    std::optional<std::size_t> fold;
    std::size_t window = 0;  // cwt / augment-preview: first window
    std::size_t count = 4;   // cwt: number of windows
    std::string stream = "signal";
    std::vector<std::string> argv;
};

namespace detail {

inline void write_json(const fs::path& p, const json& j) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    require(out.good(), ErrorCode::IoError, "cannot write " + p.string());
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::IoError, "failed writing " + p.string());
}

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    require(!ec && fs::is_directory(p), ErrorCode::IoError, "cannot create directory " + p.string());
}

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

inline dataio::SplitPlan plan_for(const RunConfig& rc, const dataio::WindowSet& ws) {
    const auto& x = rc.experiment;
    return dataio::make_splits(ws.windows, x.scheme, x.seed, x.val_fraction, x.test_fraction);
}

inline const dataio::Fold& fold_of(const RunConfig& rc, const dataio::SplitPlan& plan) {
    require(rc.fold < plan.folds.size(), ErrorCode::ConfigInvalid,
            "fold " + std::to_string(rc.fold) + " does not exist (" + std::to_string(plan.folds.size()) + " folds)");
    return plan.folds[rc.fold];
}

inline fs::path require_checkpoint(const RunConfig& rc) {
    require(rc.checkpoint.has_value(), ErrorCode::ConfigInvalid,
            "this command needs a checkpoint ('checkpoint' key or --checkpoint)");
    return *rc.checkpoint;
}

/// The config keys that can change results; output location and thread
/// count are left out so reports from different run dirs compare equal.
inline json result_config(json snapshot) {
    snapshot.erase("output_dir");
    snapshot.erase("jobs");
    return snapshot;
}

inline void write_report(const RunConfig& rc, const eval::MetricsReport& r, std::ostream& out) {
    write_json(rc.output_dir / "report.json", eval::to_json(r));
    out << eval::format_table(r);
    out << "report: " << (rc.output_dir / "report.json").string() << '\n';
}

inline void write_window_csv(const dataio::SignalWindow& w, const fs::path& p) {
    std::ofstream out(p);
    require(out.good(), ErrorCode::IoError, "cannot write " + p.string());
    out << "t,x,y,z\n";
    char buf[96];
    for (std::size_t t = 0; t < w.length(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", t, w.values(t, 0), w.values(t, 1), w.values(t, 2));
        out << buf;
    }
}

}  // namespace detail

// ---- commands: each returns a JSON summary of what it wrote ----

inline json cmd_synth(const RunConfig& rc, const CommandArgs& a, std::ostream& out) {
    require(rc.corpus.synth.has_value(), ErrorCode::ConfigInvalid, "synth needs 'corpus.synth'");
    detail::ensure_dir(rc.output_dir);
    const auto path = a.out.value_or(rc.output_dir / "corpus.csv");
    const auto rs = load_recordings(rc.corpus);
    dataio::save_csv(rs, path.string());
    json summary = {{"corpus", path.string()}, {"recordings", rs.recordings.size()}, {"samples", rs.total_samples()}};
    out << "wrote " << rs.recordings.size() << " recordings (" << rs.total_samples() << " samples) to "
        << path.string() << '\n';
    if (rc.target_corpus && rc.target_corpus->synth) {
        const auto tpath = rc.output_dir / "target_corpus.csv";
        dataio::save_csv(load_recordings(*rc.target_corpus), tpath.string());
        summary["target_corpus"] = tpath.string();
        out << "wrote target corpus to " << tpath.string() << '\n';
    }
    return summary;
}

inline json cmd_ingest(const RunConfig& rc, const CommandArgs&, std::ostream& out) {
    const auto rs = load_recordings(rc.corpus);
    const auto ws = dataio::window(rs, rc.corpus.window_len, rc.corpus.stride);
    std::map<std::string, std::map<std::string, std::size_t>> per_subject;
    for (const auto& w : ws.windows) ++per_subject[w.subject][ws.labels.names()[static_cast<std::size_t>(*w.label)]];
    json summary = {{"recordings", rs.recordings.size()},
                    {"samples", rs.total_samples()},
                    {"sample_rate_hz", rs.sample_rate_hz},
                    {"window_len", ws.window_len},
                    {"stride", rc.corpus.stride},
                    {"windows", ws.windows.size()},
                    {"skipped_recordings", ws.skipped_recordings},
                    {"subjects", ws.subjects().size()},
                    {"label_map", ws.labels.names()},
                    {"windows_per_subject", per_subject}};
    detail::write_json(rc.output_dir / "ingest.json", summary);
    out << rs.recordings.size() << " recordings, " << ws.windows.size() << " windows, " << ws.subjects().size()
        << " subjects, " << ws.labels.size() << " labels, " << ws.skipped_recordings << " recordings skipped\n";
    return summary;
}

inline json cmd_cwt(const RunConfig& rc, const CommandArgs& a, std::ostream& out) {
    const auto ws = load_corpus(rc.corpus);
    require(a.window < ws.windows.size(), ErrorCode::ConfigInvalid,
            "window " + std::to_string(a.window) + " does not exist (" + std::to_string(ws.windows.size()) + ")");
    const auto grid = rc.experiment.signal_pretrain.scale_grid.grid(ws.sample_rate_hz);
    const wavelet::CwtPlan plan(grid, ws.window_len);
    const auto dir = rc.output_dir / "cwt";
    detail::ensure_dir(dir);
    json files = json::array();
    const std::size_t end = std::min(ws.windows.size(), a.window + a.count);
    for (std::size_t i = a.window; i < end; ++i) {
        const auto s = wavelet::scalogram(ws.windows[i], plan);
        const auto stem = dir / ("window_" + std::to_string(i));
        wavelet::write_tfsca(s, stem.string() + ".tfsca");
        wavelet::write_png(s, stem.string() + ".png");
        files.push_back(stem.string());
    }
    out << "wrote " << files.size() << " scalograms to " << dir.string() << '\n';
    return {{"scalograms", files}, {"scale_grid", contrastive::to_json(grid)}};
}

inline json cmd_augment_preview(const RunConfig& rc, const CommandArgs& a, std::ostream& out) {
    const auto ws = load_corpus(rc.corpus);
    require(a.window < ws.windows.size(), ErrorCode::ConfigInvalid, "window " + std::to_string(a.window) + " does not exist");
    const auto& w = ws.windows[a.window];
    const auto& p = rc.experiment.signal_pretrain;
    const auto dir = rc.output_dir / "augment";
    detail::ensure_dir(dir);
    const RngStream rng(rc.experiment.seed, 0xa96);
    const auto [ti, tj] = augment::make_views(w, p.temporal, rng.split(0));
    detail::write_window_csv(w, dir / "signal_original.csv");
    detail::write_window_csv(ti, dir / "signal_view_i.csv");
    detail::write_window_csv(tj, dir / "signal_view_j.csv");
    const auto s = wavelet::scalogram(w, p.scale_grid.grid(ws.sample_rate_hz));
    const auto [si, sj] = augment::make_views(s, p.timefreq, rng.split(1));
    wavelet::write_png(s, (dir / "scalogram_original.png").string());
    wavelet::write_png(si, (dir / "scalogram_view_i.png").string());
    wavelet::write_png(sj, (dir / "scalogram_view_j.png").string());
    out << "wrote augmentation previews of window " << a.window << " to " << dir.string() << '\n';
    return {{"dir", dir.string()}, {"window", a.window}};
}

inline json cmd_pretrain(const RunConfig& rc, const CommandArgs&, std::ostream& out) {
    const auto ws = load_corpus(rc.corpus);
    const auto& x = rc.experiment;
    const auto plan = detail::plan_for(rc, ws);
    const auto& fold = detail::fold_of(rc, plan);
    const auto dir = rc.output_dir / "pretrain";
    detail::ensure_dir(dir);
    detail::write_json(rc.output_dir / "split.json", dataio::to_json(plan));
    ProvenanceAudit audit{fold.test};
    nn::Checkpoint c;
    if (x.pretrain_per_fold)
        c = eval::pretrain_streams(x, eval::select(ws.windows, fold.train), ws.sample_rate_hz,
                                   eval::fold_seed(x.seed, rc.fold), &audit, &dir, x.jobs);
    else
        c = eval::pretrain_streams(x, ws.windows, ws.sample_rate_hz, eval::shared_pretrain_seed(x.seed), nullptr,
                                   &dir, x.jobs);
    c.label_map = ws.labels.names();
    nn::save_checkpoint(c, dir / "checkpoint");
    out << "pretrained " << c.components.size() << " components on fold " << rc.fold << "; checkpoint "
        << (dir / "checkpoint").string() << '\n';
    return {{"checkpoint", (dir / "checkpoint").string()}, {"checkpoint_id", eval::checkpoint_id(c)}};
}

inline json cmd_finetune(const RunConfig& rc, const CommandArgs&, std::ostream& out) {
    const auto ws = load_corpus(rc.corpus);
    const auto& x = rc.experiment;
    const auto plan = detail::plan_for(rc, ws);
    const auto& fold = detail::fold_of(rc, plan);
    const auto pre = nn::load_checkpoint(detail::require_checkpoint(rc));
    ProvenanceAudit audit{fold.test};
    const auto models = eval::finetune_streams(x, pre, ws.labels.names(), eval::select(ws.windows, fold.train),
                                               eval::select(ws.windows, fold.val), eval::fold_seed(x.seed, rc.fold),
                                               &audit, x.jobs);
    auto c = models.to_checkpoint();
    c.seed = x.seed;
    const auto dir = rc.output_dir / "finetune" / "checkpoint";
    nn::save_checkpoint(c, dir);
    out << "fine-tuned " << c.components.size() << " components on fold " << rc.fold << "; checkpoint "
        << dir.string() << '\n';
    return {{"checkpoint", dir.string()}, {"checkpoint_id", eval::checkpoint_id(c)}, {"audit_checks", audit.checks}};
}

inline json cmd_evaluate(const RunConfig& rc, const CommandArgs& a, const json& snapshot, std::ostream& out) {
    const auto ws = load_corpus(rc.corpus);
    const auto& x = rc.experiment;
    const auto plan = detail::plan_for(rc, ws);
    detail::ensure_dir(rc.output_dir);
    eval::MetricsReport r;
    if (a.models) {
        // score one fine-tuned checkpoint on the configured fold's test subjects
        const auto& fold = detail::fold_of(rc, plan);
        const auto c = nn::load_checkpoint(*a.models);
        const auto models = eval::fold_models_from_checkpoint(c);
        require(c.label_map == ws.labels.names(), ErrorCode::LabelsMissing,
                "checkpoint label map differs from the corpus labels");
        const bool need_both = x.fusion == eval::FusionMode::Score;
        require(!need_both || (models.signal && models.scalogram), ErrorCode::ConfigInvalid,
                "score fusion needs both stream heads in " + a.models->string());
        require(x.fusion != eval::FusionMode::Feature || models.fusion, ErrorCode::ConfigInvalid,
                "feature fusion needs a fusion head in " + a.models->string());
        const auto test = eval::select(ws.windows, fold.test);
        r.scheme = plan.scheme;
        r.seed = x.seed;
        r.config_hash = eval::config_hash(detail::result_config(snapshot));
        r.primary = eval::evaluated_models(x.fusion).back();
        r.labels = ws.labels.names();
        eval::FoldResult f;
        f.fold = rc.fold;
        f.subjects = fold;
        f.train_windows = eval::select(ws.windows, fold.train).size();
        f.val_windows = eval::select(ws.windows, fold.val).size();
        f.test_windows = test.size();
        f.checkpoint_ids["finetuned"] = eval::checkpoint_id(c);
        f.models = eval::evaluate_models(x, models, test, ws.labels.size(), x.jobs);
        r.folds.push_back(std::move(f));
    } else {
        const fs::path runs = rc.output_dir / "folds";
        r = eval::run_scheme(ws, plan, x, detail::result_config(snapshot), nullptr, &runs);
    }
    detail::write_report(rc, r, out);
    return {{"report", (rc.output_dir / "report.json").string()}};
}

inline json cmd_transfer(const RunConfig& rc, const CommandArgs&, const json& snapshot, std::ostream& out) {
    require(rc.target_corpus.has_value(), ErrorCode::ConfigInvalid, "transfer needs 'target_corpus'");
    const auto source = load_corpus(rc.corpus);
    const auto target = load_corpus(*rc.target_corpus);
    const auto plan = detail::plan_for(rc, target);
    detail::ensure_dir(rc.output_dir);
    std::optional<nn::Checkpoint> shared;
    if (rc.checkpoint) shared = nn::load_checkpoint(*rc.checkpoint);
    const fs::path runs = rc.output_dir / "folds";
    const auto r = eval::transfer_protocol(source, target, plan, rc.experiment, detail::result_config(snapshot),
                                           shared ? &*shared : nullptr,
                                           &runs);
    detail::write_report(rc, r, out);
    return {{"report", (rc.output_dir / "report.json").string()}};
}

inline json cmd_export_embeddings(const RunConfig& rc, const CommandArgs& a, std::ostream& out) {
    const auto ws = load_corpus(rc.corpus);
    const auto c = nn::load_checkpoint(detail::require_checkpoint(rc));
    const auto stream = contrastive::stream_from_string(a.stream);
    const auto enc = downstream::encoder_from_checkpoint(c, stream);
    const auto grid = stream == contrastive::Stream::Scalogram ? eval::grid_of(c) : std::nullopt;
    require(stream == contrastive::Stream::Signal || grid.has_value(), ErrorCode::CorruptManifest, "checkpoint has no scale grid");
    detail::ensure_dir(rc.output_dir);
    const auto path = a.out.value_or(rc.output_dir / ("embeddings_" + a.stream + ".csv"));
    eval::export_embeddings(stream, enc, grid, ws.windows, ws.labels.names(), path, rc.experiment.jobs);
    out << "wrote " << ws.windows.size() << " embeddings to " << path.string() << '\n';
    return {{"embeddings", path.string()}, {"rows", ws.windows.size()}};
}

namespace detail {

inline json dispatch(const RunConfig& rc, const CommandArgs& a, const json& snapshot, std::ostream& out) {
    if (a.command == "synth") return cmd_synth(rc, a, out);
    if (a.command == "ingest") return cmd_ingest(rc, a, out);
    if (a.command == "cwt") return cmd_cwt(rc, a, out);
    if (a.command == "augment-preview") return cmd_augment_preview(rc, a, out);
    if (a.command == "pretrain") return cmd_pretrain(rc, a, out);
    if (a.command == "finetune") return cmd_finetune(rc, a, out);
    if (a.command == "evaluate") return cmd_evaluate(rc, a, snapshot, out);
    if (a.command == "transfer") return cmd_transfer(rc, a, snapshot, out);
    if (a.command == "export-embeddings") return cmd_export_embeddings(rc, a, out);
    fail(ErrorCode::ConfigInvalid, "unknown command '" + a.command + "'");
}

struct PreparedRun {
    std::string name;
    RunConfig config;
    json snapshot;
};

/// Runs one prepared config and writes its provenance record.
inline int execute(const PreparedRun& run, const CommandArgs& a, std::ostream& out, std::ostream& err) {
    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    int code = kExitOk;
    json outputs, error;
    try {
        outputs = dispatch(run.config, a, run.snapshot, out);
    } catch (const Error& e) {
        code = exit_code(e.code());
        error = {{"code", std::string(to_string(e.code()))}, {"message", e.message()}};
        err << "error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        code = e.what() == std::string("std::bad_alloc") ? kExitData : kExitInternal;
        error = {{"code", "INTERNAL"}, {"message", e.what()}};
        err << "error: " << e.what() << '\n';
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json prov = {{"command", a.command},
                 {"argv", a.argv},
                 {"version", TFCL_VERSION},
                 {"config", run.snapshot},
                 {"config_hash", eval::config_hash(detail::result_config(run.snapshot))},
                 {"seed", run.config.experiment.seed},
                 {"jobs", run.config.experiment.jobs},
                 {"hardware_threads", std::thread::hardware_concurrency()},
                 {"started_utc", started},
                 {"timings", {{"wall_time_s", wall}}},
                 {"exit_code", code},
                 {"outputs", outputs}};
    if (!run.name.empty()) prov["sweep_run"] = run.name;
    if (!error.is_null()) prov["error"] = error;
    try {
        write_json(run.config.output_dir / "provenance.json", prov);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        if (code == kExitOk) code = kExitIo;
    }
    return code;
}

}  // namespace detail

/// Validates every (sweep-expanded) config before running anything, then
/// runs them; sweep entries may run concurrently with --jobs.
inline int run_command(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<detail::PreparedRun> runs;
    try {
        if (std::find(command_names().begin(), command_names().end(), a.command) == command_names().end())
            fail(ErrorCode::ConfigInvalid, "unknown command '" + a.command + "'");
        json raw = load_config_file(a.config_path);
        for (const auto& o : a.overrides) apply_override(raw, o);
        const fs::path base = fs::absolute(a.config_path).parent_path();
        for (auto& sr : expand_sweep(raw)) {
            RunConfig rc = parse_config(sr.config, base);
            if (a.jobs) rc.experiment.jobs = *a.jobs;
            if (a.checkpoint) rc.checkpoint = fs::absolute(*a.checkpoint);
            if (a.fold) rc.fold = *a.fold;
            if (!sr.name.empty()) rc.output_dir /= sr.name;
            runs.push_back({sr.name, rc, json()});
        }
        if (runs.size() > 1 && runs.front().config.experiment.jobs > 1) {
            for (auto& r : runs) r.config.experiment.jobs = 1;  // parallelism moves to the sweep level
        }
        for (auto& r : runs) r.snapshot = to_json(r.config);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.code());
    }
    if (runs.size() == 1) return detail::execute(runs[0], a, out, err);

    const unsigned jobs = a.jobs.value_or(1);
    std::vector<std::ostringstream> outs(runs.size()), errs(runs.size());
    std::vector<int> codes(runs.size(), 0);
    parallel_for(runs.size(), jobs, [&](std::size_t i) {
        outs[i] << "[" << runs[i].name << "]\n";
        codes[i] = detail::execute(runs[i], a, outs[i], errs[i]);
    });
    int code = kExitOk;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out << outs[i].str();
        err << errs[i].str();
        if (code == kExitOk) code = codes[i];
    }
    return code;
}

}  // namespace tfcl::cli

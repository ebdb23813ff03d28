#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/contrastive/pretrain.hpp"
#include "tfcl/core/parallel.hpp"
#include "tfcl/core/provenance.hpp"
#include "tfcl/dataio/split.hpp"
#include "tfcl/dataio/window.hpp"
#include "tfcl/downstream/finetune.hpp"
#include "tfcl/downstream/fusion.hpp"
#include "tfcl/eval/metrics.hpp"
#include "tfcl/nn/checkpoint.hpp"

namespace tfcl::eval {

using contrastive::Stream;

inline constexpr int kReportSchemaVersion = 1;

enum class FusionMode { Score, Feature, SignalOnly, ScalogramOnly };

inline std::string to_string(FusionMode m) {
    switch (m) {
        case FusionMode::Score: return "score";
        case FusionMode::Feature: return "feature";
        case FusionMode::SignalOnly: return "signal-only";
        case FusionMode::ScalogramOnly: return "scalogram-only";
    }
    return "score";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
    for (auto m : {FusionMode::Score, FusionMode::Feature, FusionMode::SignalOnly, FusionMode::ScalogramOnly})
        if (to_string(m) == s) return m;
    fail(ErrorCode::ConfigInvalid, "unknown fusion mode '" + s + "'");
}

/// Everything one evaluation run needs besides the corpus.
struct ExperimentConfig {
    dataio::Scheme scheme = dataio::Scheme::Scheme1;
    std::uint64_t seed = 0;
    double val_fraction = 0.2;
    double test_fraction = 0.2;
    contrastive::PretrainConfig signal_pretrain = [] {
        contrastive::PretrainConfig c;
        c.learner = Stream::Signal;
        c.epochs = 150;
        return c;
    }();
    contrastive::PretrainConfig scalogram_pretrain = [] {
        contrastive::PretrainConfig c;
        c.learner = Stream::Scalogram;
        c.epochs = 50;
        return c;
    }();
    downstream::FinetuneConfig signal_finetune = [] {
        downstream::FinetuneConfig c;
        c.epochs = 70;
        return c;
    }();
    downstream::FinetuneConfig scalogram_finetune = [] {
        downstream::FinetuneConfig c;
        c.epochs = 50;
        return c;
    }();
    FusionMode fusion = FusionMode::Score;
    double fusion_weight = 0.5;
    bool pretrain_per_fold = true;  // false: one pretraining run on every subject (leaks test subjects)
    unsigned jobs = 1;

    bool uses(Stream s) const {
        return !(fusion == FusionMode::SignalOnly && s == Stream::Scalogram) &&
               !(fusion == FusionMode::ScalogramOnly && s == Stream::Signal);
    }
};

/// Names of the predictors evaluated under a fusion mode; the last is the
/// configured (primary) one.
inline std::vector<std::string> evaluated_models(FusionMode m) {
    switch (m) {
        case FusionMode::SignalOnly: return {"signal"};
        case FusionMode::ScalogramOnly: return {"scalogram"};
        case FusionMode::Feature: return {"signal", "scalogram", "feature_fusion"};
        case FusionMode::Score: break;
    }
    return {"signal", "scalogram", "score_fusion"};
}

struct ModelMetrics {
    double weighted_f1 = 0.0;
    std::optional<double> kappa;  // absent when chance agreement is 1
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

inline ModelMetrics score(const ConfusionMatrix& m) {
    ModelMetrics out{weighted_f1(m), std::nullopt, accuracy(m), m};
    try {
        out.kappa = cohen_kappa(m);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Degenerate) throw;
    }
    return out;
}

struct FoldResult {
    std::size_t fold = 0;
    dataio::Fold subjects;
    std::size_t train_windows = 0, val_windows = 0, test_windows = 0;
    std::map<std::string, std::string> checkpoint_ids;  // role -> weight hash
    std::size_t audit_checks = 0;
    std::map<std::string, ModelMetrics> models;
};

struct MetricsReport {
    dataio::Scheme scheme = dataio::Scheme::Scheme1;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string primary;
    std::vector<std::string> labels;
    std::vector<FoldResult> folds;

    struct Summary {
        double mean = 0.0, std = 0.0;
    };
    /// Unweighted mean over folds and sample standard deviation (0 for one fold).
    Summary aggregate(const std::string& model, const std::string& metric) const {
        std::vector<double> v;
        for (const auto& f : folds) {
            const auto it = f.models.find(model);
            if (it == f.models.end()) continue;
            if (metric == "weighted_f1") v.push_back(it->second.weighted_f1);
            else if (metric == "accuracy") v.push_back(it->second.accuracy);
            else if (metric == "kappa" && it->second.kappa) v.push_back(*it->second.kappa);
        }
        Summary s;
        if (v.empty()) return s;
        for (double x : v) s.mean += x;
        s.mean /= static_cast<double>(v.size());
        if (v.size() > 1) {
            double ss = 0.0;
            for (double x : v) ss += (x - s.mean) * (x - s.mean);
            s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
        return s;
    }

    std::vector<std::string> model_names() const {
        std::vector<std::string> out;
        for (const auto& f : folds)
            for (const auto& [k, _] : f.models)
                if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
        return out;
    }
};

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds) {
        nlohmann::json models = nlohmann::json::object();
        for (const auto& [name, m] : f.models)
            models[name] = {{"weighted_f1", m.weighted_f1},
                            {"kappa", m.kappa ? nlohmann::json(*m.kappa) : nlohmann::json(nullptr)},
                            {"accuracy", m.accuracy},
                            {"confusion", to_json(m.confusion)}};
        folds.push_back({{"fold", f.fold},
                         {"train_subjects", f.subjects.train},
                         {"val_subjects", f.subjects.val},
                         {"test_subjects", f.subjects.test},
                         {"windows", {{"train", f.train_windows}, {"val", f.val_windows}, {"test", f.test_windows}}},
                         {"checkpoints", f.checkpoint_ids},
                         {"audit_checks", f.audit_checks},
                         {"models", models}});
    }
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& name : r.model_names())
        for (const char* metric : {"weighted_f1", "kappa", "accuracy"}) {
            const auto s = r.aggregate(name, metric);
            agg[name][metric] = {{"mean", s.mean}, {"std", s.std}};
        }
    return {{"schema_version", kReportSchemaVersion},
            {"scheme", dataio::to_string(r.scheme)},
            {"seed", r.seed},
            {"config_hash", r.config_hash},
            {"primary_model", r.primary},
            {"labels", r.labels},
            {"folds", folds},
            {"aggregate", agg}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    try {
        require(j.at("schema_version").get<int>() == kReportSchemaVersion, ErrorCode::CorruptManifest,
                "unsupported report schema version");
        r.scheme = dataio::scheme_from_string(j.at("scheme").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.primary = j.at("primary_model").get<std::string>();
        r.labels = j.at("labels").get<std::vector<std::string>>();
        for (const auto& fj : j.at("folds")) {
            FoldResult f;
            f.fold = fj.at("fold").get<std::size_t>();
            f.subjects.train = fj.at("train_subjects").get<std::set<std::string>>();
            f.subjects.val = fj.at("val_subjects").get<std::set<std::string>>();
            f.subjects.test = fj.at("test_subjects").get<std::set<std::string>>();
            f.train_windows = fj.at("windows").at("train").get<std::size_t>();
            f.val_windows = fj.at("windows").at("val").get<std::size_t>();
            f.test_windows = fj.at("windows").at("test").get<std::size_t>();
            f.checkpoint_ids = fj.at("checkpoints").get<std::map<std::string, std::string>>();
            f.audit_checks = fj.at("audit_checks").get<std::size_t>();
            for (const auto& [name, mj] : fj.at("models").items()) {
                ModelMetrics m;
                m.weighted_f1 = mj.at("weighted_f1").get<double>();
                if (!mj.at("kappa").is_null()) m.kappa = mj.at("kappa").get<double>();
                m.accuracy = mj.at("accuracy").get<double>();
                m.confusion = confusion_from_json(mj.at("confusion"));
                f.models[name] = m;
            }
            r.folds.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptManifest, std::string("bad metrics report: ") + e.what());
    }
    return r;
}

/// Human-readable summary table.
inline std::string format_table(const MetricsReport& r) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %6s %18s %18s %18s\n", "model", "folds", "weighted_f1", "kappa",
                  "accuracy");
    out << line;
    for (const auto& name : r.model_names()) {
        std::size_t n = 0;
        for (const auto& f : r.folds) n += f.models.count(name);
        const auto f1 = r.aggregate(name, "weighted_f1"), k = r.aggregate(name, "kappa"),
                   acc = r.aggregate(name, "accuracy");
        std::snprintf(line, sizeof line, "%-16s %6zu %9.4f +- %6.4f %9.4f +- %6.4f %9.4f +- %6.4f%s\n",
                      name.c_str(), n, f1.mean, f1.std, k.mean, k.std, acc.mean, acc.std,
                      name == r.primary ? "  *" : "");
        out << line;
    }
    return out.str();
}

inline std::string checkpoint_id(const nn::Checkpoint& c) {
    const auto blob = nn::detail::encode_floats(c);
    return nn::hex64(nn::fnv1a64(blob.data(), blob.size()));
}

/// Joins per-stream checkpoints into one (components in argument order).
inline nn::Checkpoint merge_checkpoints(const std::vector<nn::Checkpoint>& parts) {
    nn::Checkpoint out;
    out.extra = nlohmann::json::object();
    nlohmann::json hp = nlohmann::json::object(), hist = nlohmann::json::object();
    for (const auto& p : parts) {
        for (const auto& comp : p.components) {
            require(out.find(comp.role) == nullptr, ErrorCode::InvalidParams, "duplicate component " + comp.role);
            out.components.push_back(comp);
        }
        const std::string s = p.extra.value("stream", std::string("model"));
        hp[s] = p.hyperparameters;
        hist[s] = p.history;
        for (const auto& [k, v] : p.extra.items())
            if (k != "stream") out.extra[k] = v;
        if (!p.label_map.empty()) out.label_map = p.label_map;
        out.seed = p.seed;
    }
    out.hyperparameters = hp;
    out.history = hist;
    return out;
}

/// Windows of `ws` whose subject is in `subjects`.
inline std::vector<dataio::SignalWindow> select(const std::vector<dataio::SignalWindow>& ws,
                                                const std::set<std::string>& subjects) {
    std::vector<dataio::SignalWindow> out;
    for (const auto& w : ws)
        if (subjects.count(w.subject)) out.push_back(w);
    return out;
}

inline std::vector<dataio::SignalWindow> unlabeled(std::vector<dataio::SignalWindow> ws) {
    for (auto& w : ws) w.label.reset();
    return ws;
}

/// Pretrains the streams the experiment uses and returns one checkpoint.
inline nn::Checkpoint pretrain_streams(const ExperimentConfig& cfg, const std::vector<dataio::SignalWindow>& windows,
                                       double sample_rate_hz, std::uint64_t seed, ProvenanceAudit* audit,
                                       const std::filesystem::path* log_dir, unsigned jobs) {
    std::vector<nn::Checkpoint> parts;
    const RngStream seeds(seed, 0x9e7a);
    for (Stream s : {Stream::Signal, Stream::Scalogram}) {
        if (!cfg.uses(s)) continue;
        auto pc = s == Stream::Signal ? cfg.signal_pretrain : cfg.scalogram_pretrain;
        pc.learner = s;
        pc.seed = seeds.split(s == Stream::Signal ? 1 : 2).engine()();
        pc.jobs = jobs;
        std::ofstream log;
        if (log_dir) {
            std::filesystem::create_directories(*log_dir);
            log.open(*log_dir / ("pretrain_" + contrastive::to_string(s) + ".jsonl"));
            require(log.good(), ErrorCode::IoError, "cannot write pretraining log in " + log_dir->string());
        }
        const auto r = contrastive::pretrain(pc, unlabeled(windows), sample_rate_hz, audit, log_dir ? &log : nullptr);
        parts.push_back(r.to_checkpoint());
    }
    return merge_checkpoints(parts);
}

/// Seed of fold k; the single-fold CLI commands use the same derivation so
/// they reproduce the corresponding fold of a full run.
inline std::uint64_t fold_seed(std::uint64_t seed, std::size_t k) {
    return RngStream(seed, 0xf01d).split(k).engine()();
}

/// Seed of the single pretraining run shared by all folds (permissive mode).
inline std::uint64_t shared_pretrain_seed(std::uint64_t seed) { return RngStream(seed, 0xa11).engine()(); }

/// Fine-tuned predictors of one fold.
struct FoldModels {
    std::optional<downstream::StreamClassifier> signal, scalogram;
    std::optional<downstream::FusionModel> fusion;
    nlohmann::json history = nlohmann::json::object();  // per head: epoch records

    nn::Checkpoint to_checkpoint() const {
        nn::Checkpoint c;
        if (signal) downstream::append_to_checkpoint(c, *signal);
        if (scalogram) downstream::append_to_checkpoint(c, *scalogram);
        if (fusion) downstream::append_to_checkpoint(c, *fusion);
        c.history = history;
        return c;
    }
};

/// Rebuilds whichever fine-tuned predictors a checkpoint holds.
inline FoldModels fold_models_from_checkpoint(const nn::Checkpoint& c) {
    FoldModels m;
    if (c.find("signal.har_head")) m.signal = downstream::classifier_from_checkpoint(c, Stream::Signal);
    if (c.find("scalogram.har_head")) m.scalogram = downstream::classifier_from_checkpoint(c, Stream::Scalogram);
    if (c.find("fusion.head")) {
        downstream::FusionModel f;
        const auto& se = c.at("fusion.signal_encoder");
        const auto& ce = c.at("fusion.scalogram_encoder");
        f.signal_encoder = nn::ConvEncoder<float>(nn::encoder_config_from_json(se.arch, se.config));
        f.signal_encoder.params() = se.params;
        f.scalogram_encoder = nn::ConvEncoder<float>(nn::encoder_config_from_json(ce.arch, ce.config));
        f.scalogram_encoder.params() = ce.params;
        const auto& h = c.at("fusion.head");
        f.head = nn::Mlp<float>(h.config.at("widths").get<std::vector<std::size_t>>());
        f.head.params() = h.params;
        f.labels = c.label_map;
        f.grid = contrastive::scale_grid_from_json(c.extra.at("scale_grid"));
        m.fusion = std::move(f);
    }
    require(m.signal || m.scalogram || m.fusion, ErrorCode::CorruptManifest, "checkpoint holds no fine-tuned head");
    return m;
}

inline std::optional<wavelet::ScaleGrid> grid_of(const nn::Checkpoint& c) {
    if (!c.extra.contains("scale_grid")) return std::nullopt;
    return contrastive::scale_grid_from_json(c.extra.at("scale_grid"));
}

/// Fine-tunes the configured heads on top of a pretraining checkpoint.
inline FoldModels finetune_streams(const ExperimentConfig& cfg, const nn::Checkpoint& pre,
                                   const std::vector<std::string>& labels,
                                   const std::vector<dataio::SignalWindow>& train,
                                   const std::vector<dataio::SignalWindow>& val, std::uint64_t seed,
                                   ProvenanceAudit* audit, unsigned jobs) {
    FoldModels m;
    const RngStream seeds(seed, 0xf1e7);
    for (Stream s : {Stream::Signal, Stream::Scalogram}) {
        if (!cfg.uses(s)) continue;
        auto fc = s == Stream::Signal ? cfg.signal_finetune : cfg.scalogram_finetune;
        fc.seed = seeds.split(s == Stream::Signal ? 1 : 2).engine()();
        fc.jobs = jobs;
        const auto enc = downstream::encoder_from_checkpoint(pre, s);
        const auto grid = s == Stream::Scalogram ? grid_of(pre) : std::nullopt;
        require(s == Stream::Signal || grid.has_value(), ErrorCode::CorruptManifest,
                "scalogram checkpoint has no scale grid");
        auto r = downstream::finetune(s, enc, grid, labels, train, val, fc, audit);
        m.history[contrastive::to_string(s)] = {{"best_epoch", r.report.best_epoch}, {"epochs", r.report.history}};
        (s == Stream::Signal ? m.signal : m.scalogram) = std::move(r.model);
    }
    if (cfg.fusion == FusionMode::Feature) {
        auto fc = cfg.signal_finetune;
        fc.seed = seeds.split(3).engine()();
        fc.jobs = jobs;
        auto r = downstream::train_fusion(*m.signal, *m.scalogram, train, val, fc, audit);
        m.history["fusion"] = {{"best_epoch", r.report.best_epoch}, {"epochs", r.report.history}};
        m.fusion = std::move(r.model);
    }
    return m;
}

/// Test-set metrics of every fine-tuned predictor.
inline std::map<std::string, ModelMetrics> evaluate_models(const ExperimentConfig& cfg, const FoldModels& m,
                                                           const std::vector<dataio::SignalWindow>& test,
                                                           std::size_t classes, unsigned jobs) {
    require(!test.empty(), ErrorCode::InsufficientData, "no test windows");
    std::vector<int> truth;
    for (const auto& w : test) {
        require(w.label.has_value(), ErrorCode::LabelsMissing, "test window has no label");
        truth.push_back(*w.label);
    }
    auto matrix = [&](const std::vector<std::vector<double>>& p) {
        std::vector<int> pred;
        for (const auto& row : p) pred.push_back(static_cast<int>(downstream::argmax_lowest(row)));
        return confusion(pred, truth, classes);
    };
    std::map<std::string, ModelMetrics> out;
    std::vector<std::vector<double>> ps, pc;
    if (m.signal) out["signal"] = score(matrix(ps = downstream::predict_all(*m.signal, test, jobs)));
    if (m.scalogram) out["scalogram"] = score(matrix(pc = downstream::predict_all(*m.scalogram, test, jobs)));
    if (cfg.fusion == FusionMode::Score) {
        std::vector<std::vector<double>> f(test.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = downstream::fuse_scores(ps[i], pc[i], cfg.fusion_weight);
        out["score_fusion"] = score(matrix(f));
    }
    if (m.fusion) out["feature_fusion"] = score(matrix(downstream::predict_fusion(*m.fusion, test, jobs)));
    return out;
}

inline std::string config_hash(const nlohmann::json& snapshot) {
    const std::string s = snapshot.dump();
    return nn::hex64(nn::fnv1a64(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

/// Cross-validation driver. Each fold pretrains on its training subjects
/// (unless a shared checkpoint is given, or pretrain_per_fold is off),
/// fine-tunes on labeled training windows with early stopping on the
/// validation subjects, and scores every predictor on the test subjects.
/// Test subjects are audited out of every training batch.
inline MetricsReport run_scheme(const dataio::WindowSet& ws, const dataio::SplitPlan& plan,
                                const ExperimentConfig& cfg, const nlohmann::json& config_snapshot,
                                const nn::Checkpoint* shared_pretrained = nullptr,
                                const std::filesystem::path* run_dir = nullptr) {
    require(!plan.folds.empty(), ErrorCode::InvalidParams, "split plan has no folds");
    const auto& labels = ws.labels.names();
    MetricsReport report;
    report.scheme = plan.scheme;
    report.seed = cfg.seed;
    report.config_hash = config_hash(config_snapshot);
    report.primary = evaluated_models(cfg.fusion).back();
    report.labels = labels;
    report.folds.resize(plan.folds.size());

    std::optional<nn::Checkpoint> permissive;
    if (!shared_pretrained && !cfg.pretrain_per_fold) {
        const auto dir = run_dir ? std::optional(*run_dir / "pretrain") : std::nullopt;
        permissive = pretrain_streams(cfg, ws.windows, ws.sample_rate_hz, shared_pretrain_seed(cfg.seed),
                                      nullptr, dir ? &*dir : nullptr, cfg.jobs);
    }
    const unsigned fold_jobs = std::min<unsigned>(cfg.jobs, static_cast<unsigned>(plan.folds.size()));
    const unsigned inner_jobs = plan.folds.size() == 1 ? cfg.jobs : 1;
    parallel_for(plan.folds.size(), std::max(1u, fold_jobs), [&](std::size_t k) {
        try {
            const auto& fold = plan.folds[k];
            const auto seed_k = fold_seed(cfg.seed, k);
            const auto fold_dir = run_dir ? std::optional(*run_dir / ("fold_" + std::to_string(k))) : std::nullopt;
            const auto train = select(ws.windows, fold.train);
            const auto val = select(ws.windows, fold.val);
            const auto test = select(ws.windows, fold.test);
            ProvenanceAudit audit{fold.test};
            nn::Checkpoint pre;
            if (shared_pretrained) pre = *shared_pretrained;
            else if (permissive) pre = *permissive;
            else
                pre = pretrain_streams(cfg, train, ws.sample_rate_hz, seed_k, &audit,
                                       fold_dir ? &*fold_dir : nullptr, inner_jobs);
            auto& fr = report.folds[k];
            fr.fold = k;
            fr.subjects = fold;
            fr.train_windows = train.size();
            fr.val_windows = val.size();
            fr.test_windows = test.size();
            fr.checkpoint_ids["pretrained"] = checkpoint_id(pre);
            const auto models =
                finetune_streams(cfg, pre, labels, train, val, seed_k, &audit, inner_jobs);
            const auto tuned = models.to_checkpoint();
            fr.checkpoint_ids["finetuned"] = checkpoint_id(tuned);
            fr.audit_checks = audit.checks;
            fr.models = evaluate_models(cfg, models, test, labels.size(), inner_jobs);
            if (fold_dir) {
                if (!shared_pretrained) nn::save_checkpoint(pre, *fold_dir / "pretrained");
                nn::save_checkpoint(tuned, *fold_dir / "finetuned");
            }
        } catch (const Error& e) {
            throw Error(e.code(), "fold " + std::to_string(k) + ": " + e.message());
        }
    });
    return report;
}

/// Cross-dataset protocol: one pretraining run on every window of the source
/// corpus, then the scheme on the target corpus with that checkpoint shared
/// by all folds (loaded, never retrained). Label maps are independent.
inline MetricsReport transfer_protocol(const dataio::WindowSet& source, const dataio::WindowSet& target,
                                       const dataio::SplitPlan& plan, const ExperimentConfig& cfg,
                                       const nlohmann::json& config_snapshot, const nn::Checkpoint* pretrained = nullptr,
                                       const std::filesystem::path* run_dir = nullptr) {
    require(source.window_len == target.window_len, ErrorCode::WindowMismatch,
            "source windows have " + std::to_string(source.window_len) + " samples, target windows " +
                std::to_string(target.window_len));
    require(source.sample_rate_hz == target.sample_rate_hz, ErrorCode::WindowMismatch,
            "source and target sample rates differ");
    nn::Checkpoint pre;
    if (pretrained) {
        pre = *pretrained;
    } else {
        const auto dir = run_dir ? std::optional(*run_dir / "pretrain") : std::nullopt;
        pre = pretrain_streams(cfg, source.windows, source.sample_rate_hz, RngStream(cfg.seed, 0x7a5f).engine()(),
                               nullptr, dir ? &*dir : nullptr, cfg.jobs);
        if (dir) nn::save_checkpoint(pre, *dir / "checkpoint");
    }
    return run_scheme(target, plan, cfg, config_snapshot, &pre, run_dir);
}

/// Embedding CSV: header `subject,label,e0..e95,stream`, one row per window,
/// values printed with %.9g (exact float round trip). Unlabeled windows get
/// an empty label field.
inline void export_embeddings(Stream stream, const nn::ConvEncoder<float>& encoder,
                              const std::optional<wavelet::ScaleGrid>& grid,
                              const std::vector<dataio::SignalWindow>& windows, const std::vector<std::string>& labels,
                              const std::filesystem::path& path, unsigned jobs = 1) {
    const auto emb = downstream::embed_all(stream, encoder, windows, grid, jobs);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
    out << "subject,label";
    for (std::size_t d = 0; d < encoder.embedding_dim(); ++d) out << ",e" << d;
    out << ",stream\n";
    const std::string tag = contrastive::to_string(stream);
    char buf[32];
    for (std::size_t i = 0; i < windows.size(); ++i) {
        out << windows[i].subject << ',';
        if (windows[i].label) {
            const auto l = static_cast<std::size_t>(*windows[i].label);
            require(l < labels.size(), ErrorCode::BadLabel, "window label outside the label map");
            out << labels[l];
        }
        for (float v : emb[i]) {
            std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
            out << ',' << buf;
        }
        out << ',' << tag << '\n';
    }
    out.flush();
    require(out.good(), ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace tfcl::eval

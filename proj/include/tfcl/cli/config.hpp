#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/augment/views.hpp"
#include "tfcl/dataio/csv.hpp"
#include "tfcl/dataio/synth.hpp"
#include "tfcl/dataio/window.hpp"
#include "tfcl/eval/experiment.hpp"

namespace tfcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Synthetic corpus recipe.
struct SynthSpec {
    std::size_t subjects = 8;
    std::size_t windows_per_subject_class = 10;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    std::vector<dataio::ClassSpec> classes{{"slow", {2.0, 2.0, 2.0}, 1.0, 0.0},
                                           {"mid", {4.0, 4.0, 4.0}, 1.0, 0.0},
                                           {"fast", {6.0, 6.0, 6.0}, 1.0, 0.0}};
};

/// A corpus is either a CSV file or a synthetic recipe, then windowed.
struct CorpusSpec {
    std::optional<fs::path> path;
    std::optional<SynthSpec> synth;
    double sample_rate_hz = dataio::kSynthRateHz;
    std::size_t window_len = dataio::kWindowLen;
    std::size_t stride = 64;
};

struct RunConfig {
    CorpusSpec corpus;
    std::optional<CorpusSpec> target_corpus;  // transfer target
    fs::path output_dir = "runs/default";
    std::optional<fs::path> checkpoint;
    std::size_t fold = 0;  // single-fold commands (pretrain, finetune, evaluate --models)
    eval::ExperimentConfig experiment;
};

namespace detail {

/// Walks one JSON object, remembering which keys were read so leftovers can
/// be reported by their dotted path.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(ErrorCode::ConfigInvalid, "'" + where() + "' must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(ErrorCode::ConfigInvalid, "key '" + key_path(key) + "' has the wrong type");
        }
    }

    void skip(const std::string& key) { seen_.insert(key); }

    const json& sub(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) fail(ErrorCode::ConfigInvalid, "unknown key '" + key_path(k) + "'");
    }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read_range(ObjectReader& r, const std::string& key, augment::Range& out) {
    std::vector<double> v{out.lo, out.hi};
    r.read(key, v);
    if (v.size() != 2) fail(ErrorCode::ConfigInvalid, "key '" + r.key_path(key) + "' must be [lo, hi]");
    out = {v[0], v[1]};
}

inline fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() ? p : fs::absolute(base / p).lexically_normal();
}

inline CorpusSpec parse_corpus(const json& j, const std::string& path, const fs::path& base) {
    ObjectReader r(j, path);
    CorpusSpec c;
    if (r.has("path")) {
        std::string p;
        r.read("path", p);
        c.path = resolve(p, base);
    }
    if (r.has("synth")) {
        ObjectReader s(r.sub("synth"), path + ".synth");
        SynthSpec spec;
        s.read("subjects", spec.subjects);
        s.read("windows_per_subject_class", spec.windows_per_subject_class);
        s.read("noise_std", spec.noise_std);
        s.read("seed", spec.seed);
        if (s.has("classes")) {
            const json& arr = s.sub("classes");
            if (!arr.is_array()) fail(ErrorCode::ConfigInvalid, "'" + path + ".synth.classes' must be a list");
            spec.classes.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                ObjectReader cr(arr[i], path + ".synth.classes." + std::to_string(i));
                dataio::ClassSpec cs;
                std::vector<double> f{1.0, 1.0, 1.0};
                cr.read("label", cs.label);
                if (cr.has("frequency_hz") && cr.sub("frequency_hz").is_number()) {
                    double one = 0.0;
                    cr.read("frequency_hz", one);
                    f = {one};
                } else {
                    cr.read("frequency_hz", f);
                }
                if (f.size() == 1) f = {f[0], f[0], f[0]};
                if (f.size() != 3)
                    fail(ErrorCode::ConfigInvalid, "'" + cr.key_path("frequency_hz") + "' needs 1 or 3 values");
                cs.frequency_hz = {f[0], f[1], f[2]};
                cr.read("amplitude", cs.amplitude);
                cr.read("offset", cs.offset);
                cr.finish();
                spec.classes.push_back(cs);
            }
        }
        s.finish();
        c.synth = spec;
    }
    r.read("sample_rate_hz", c.sample_rate_hz);
    r.read("window_len", c.window_len);
    r.read("stride", c.stride);
    r.finish();
    if (c.path.has_value() == c.synth.has_value())
        fail(ErrorCode::ConfigInvalid, "'" + path + "' needs exactly one of 'path' or 'synth'");
    if (c.synth && c.sample_rate_hz != dataio::kSynthRateHz)
        fail(ErrorCode::ConfigInvalid, "'" + path + ".sample_rate_hz' must be 50 for a synthetic corpus");
    if (c.sample_rate_hz <= 0.0 || c.window_len == 0 || c.stride == 0)
        fail(ErrorCode::ConfigInvalid, "'" + path + "' needs positive sample_rate_hz, window_len and stride");
    return c;
}

template <class Spec>
void read_step_common(ObjectReader& r, augment::AugmentStep<Spec>& step) {
    r.read("probability", step.probability);
    if (step.probability < 0.0 || step.probability > 1.0)
        fail(ErrorCode::ConfigInvalid, "'" + r.key_path("probability") + "' must lie in [0, 1]");
}

inline augment::TemporalPipeline parse_temporal(const json& arr, const std::string& path) {
    if (!arr.is_array()) fail(ErrorCode::ConfigInvalid, "'" + path + "' must be a list");
    augment::TemporalPipeline p;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        augment::AugmentStep<augment::TemporalSpec> step;
        if (arr[i].is_string()) {
            step.spec.kind = augment::temporal_kind_from_string(arr[i].get<std::string>());
        } else {
            ObjectReader r(arr[i], path + "." + std::to_string(i));
            std::string kind;
            r.read("kind", kind);
            step.spec.kind = augment::temporal_kind_from_string(kind);
            read_step_common(r, step);
            r.read("noise_std", step.spec.noise_std);
            r.read("scale_mean", step.spec.scale_mean);
            r.read("scale_std", step.spec.scale_std);
            r.read("permutation_segments", step.spec.permutation_segments);
            r.read("warp_knots", step.spec.warp_knots);
            r.read("warp_std", step.spec.warp_std);
            r.finish();
        }
        step.spec.validate();
        p.steps.push_back(step);
    }
    return p;
}

inline augment::TimeFreqPipeline parse_timefreq(const json& arr, const std::string& path) {
    if (!arr.is_array()) fail(ErrorCode::ConfigInvalid, "'" + path + "' must be a list");
    augment::TimeFreqPipeline p;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        augment::AugmentStep<augment::TimeFreqSpec> step;
        if (arr[i].is_string()) {
            step.spec.kind = augment::timefreq_kind_from_string(arr[i].get<std::string>());
        } else {
            ObjectReader r(arr[i], path + "." + std::to_string(i));
            std::string kind;
            r.read("kind", kind);
            step.spec.kind = augment::timefreq_kind_from_string(kind);
            read_step_common(r, step);
            read_range(r, "brightness", step.spec.brightness);
            read_range(r, "contrast", step.spec.contrast);
            read_range(r, "saturation", step.spec.saturation);
            read_range(r, "hue", step.spec.hue);
            r.read("grayscale_prob", step.spec.grayscale_prob);
            read_range(r, "crop_area", step.spec.crop_area);
            read_range(r, "crop_aspect", step.spec.crop_aspect);
            r.finish();
        }
        step.spec.validate();
        p.steps.push_back(step);
    }
    return p;
}

inline json range_json(const augment::Range& r) { return json::array({r.lo, r.hi}); }

inline json corpus_json(const CorpusSpec& c) {
    json j = {{"sample_rate_hz", c.sample_rate_hz}, {"window_len", c.window_len}, {"stride", c.stride}};
    if (c.path) j["path"] = c.path->string();
    if (c.synth) {
        json classes = json::array();
        for (const auto& cs : c.synth->classes)
            classes.push_back({{"label", cs.label},
                               {"frequency_hz", cs.frequency_hz},
                               {"amplitude", cs.amplitude},
                               {"offset", cs.offset}});
        j["synth"] = {{"subjects", c.synth->subjects},
                      {"windows_per_subject_class", c.synth->windows_per_subject_class},
                      {"noise_std", c.synth->noise_std},
                      {"seed", c.synth->seed},
                      {"classes", classes}};
    }
    return j;
}

}  // namespace detail

/// Parses and validates a config object. Relative paths resolve against
/// `base_dir` (the config file's directory). Unknown keys are rejected.
inline RunConfig parse_config(const json& j, const fs::path& base_dir) {
    using detail::ObjectReader;
    ObjectReader root(j, "");
    RunConfig c;
    auto& x = c.experiment;
    if (!root.has("corpus")) fail(ErrorCode::ConfigInvalid, "missing key 'corpus'");
    c.corpus = detail::parse_corpus(root.sub("corpus"), "corpus", base_dir);
    if (root.has("target_corpus"))
        c.target_corpus = detail::parse_corpus(root.sub("target_corpus"), "target_corpus", base_dir);
    std::string out = c.output_dir.string();
    root.read("output_dir", out);
    c.output_dir = detail::resolve(out, base_dir);
    if (root.has("checkpoint")) {
        std::string p;
        root.read("checkpoint", p);
        c.checkpoint = detail::resolve(p, base_dir);
    }
    root.read("seed", x.seed);
    root.read("jobs", x.jobs);
    if (x.jobs == 0) fail(ErrorCode::ConfigInvalid, "'jobs' must be >= 1");
    root.skip("sweep");  // expanded before parsing

    if (root.has("split")) {
        ObjectReader r(root.sub("split"), "split");
        std::string scheme = dataio::to_string(x.scheme);
        r.read("scheme", scheme);
        x.scheme = dataio::scheme_from_string(scheme);
        r.read("val_fraction", x.val_fraction);
        r.read("test_fraction", x.test_fraction);
        r.read("fold", c.fold);
        r.finish();
    }

    if (root.has("pretrain")) {
        ObjectReader r(root.sub("pretrain"), "pretrain");
        auto& s = x.signal_pretrain;
        auto& g = x.scalogram_pretrain;
        std::string objective = contrastive::to_string(s.objective);
        r.read("objective", objective);
        s.objective = g.objective = contrastive::objective_from_string(objective);
        r.read("tau", s.tau);
        r.read("batch_size", s.batch_size);
        r.read("learning_rate", s.learning_rate);
        r.read("l2", s.l2);
        r.read("cache_budget_mb", s.cache_budget_mb);
        r.read("signal_epochs", s.epochs);
        r.read("scalogram_epochs", g.epochs);
        r.read("per_fold", x.pretrain_per_fold);
        g.tau = s.tau;
        g.batch_size = s.batch_size;
        g.learning_rate = s.learning_rate;
        g.l2 = s.l2;
        g.cache_budget_mb = s.cache_budget_mb;
        if (r.has("scale_grid")) {
            ObjectReader sg(r.sub("scale_grid"), "pretrain.scale_grid");
            sg.read("scales", s.scale_grid.scales);
            sg.read("f_min", s.scale_grid.f_min);
            sg.read("f_max", s.scale_grid.f_max);
            sg.finish();
        }
        g.scale_grid = s.scale_grid;
        if (r.has("augment")) {
            ObjectReader a(r.sub("augment"), "pretrain.augment");
            std::string mode = augment::to_string(s.temporal.mode);
            a.read("mode", mode);
            if (a.has("temporal")) s.temporal = detail::parse_temporal(a.sub("temporal"), "pretrain.augment.temporal");
            if (a.has("timefreq")) s.timefreq = detail::parse_timefreq(a.sub("timefreq"), "pretrain.augment.timefreq");
            s.temporal.mode = s.timefreq.mode = augment::pipeline_mode_from_string(mode);
            a.finish();
        }
        g.temporal = s.temporal;
        g.timefreq = s.timefreq;
        r.finish();
        for (const auto* p : {&s, &g}) {
            try {
                p->validate();
            } catch (const Error& e) {
                fail(ErrorCode::ConfigInvalid, "pretrain: " + e.message());
            }
            if (p->temporal.steps.empty() || p->timefreq.steps.empty())
                fail(ErrorCode::ConfigInvalid, "pretrain.augment pipelines must not be empty");
        }
    }

    if (root.has("finetune")) {
        ObjectReader r(root.sub("finetune"), "finetune");
        auto& s = x.signal_finetune;
        auto& g = x.scalogram_finetune;
        r.read("signal_epochs", s.epochs);
        r.read("scalogram_epochs", g.epochs);
        r.read("learning_rate", s.learning_rate);
        r.read("l2", s.l2);
        r.read("batch_size", s.batch_size);
        r.read("unfreeze_last_conv", s.unfreeze_last_conv);
        r.read("patience", s.patience);
        r.read("from_scratch", s.from_scratch);
        r.read("cache_budget_mb", s.cache_budget_mb);
        r.finish();
        g.learning_rate = s.learning_rate;
        g.l2 = s.l2;
        g.batch_size = s.batch_size;
        g.unfreeze_last_conv = s.unfreeze_last_conv;
        g.patience = s.patience;
        g.from_scratch = s.from_scratch;
        g.cache_budget_mb = s.cache_budget_mb;
        for (const auto* f : {&s, &g}) {
            try {
                f->validate();
            } catch (const Error& e) {
                fail(ErrorCode::ConfigInvalid, "finetune: " + e.message());
            }
        }
    }

    if (root.has("fusion")) {
        ObjectReader r(root.sub("fusion"), "fusion");
        std::string mode = eval::to_string(x.fusion);
        r.read("mode", mode);
        x.fusion = eval::fusion_mode_from_string(mode);
        r.read("weight", x.fusion_weight);
        r.finish();
        if (x.fusion_weight < 0.0 || x.fusion_weight > 1.0)
            fail(ErrorCode::ConfigInvalid, "'fusion.weight' must lie in [0, 1]");
    }
    if (x.val_fraction < 0.0 || x.val_fraction >= 1.0 || x.test_fraction <= 0.0 || x.test_fraction >= 1.0)
        fail(ErrorCode::ConfigInvalid, "split fractions must lie in [0,1) (val) and (0,1) (test)");
    root.finish();
    return c;
}

/// Fully resolved config (defaults filled in, absolute paths); feeding it
/// back through parse_config reproduces the same run.
inline json to_json(const RunConfig& c) {
    const auto& x = c.experiment;
    const auto& s = x.signal_pretrain;
    json temporal = json::array(), timefreq = json::array();
    for (const auto& st : s.temporal.steps)
        temporal.push_back({{"kind", augment::to_string(st.spec.kind)},
                            {"probability", st.probability},
                            {"noise_std", st.spec.noise_std},
                            {"scale_mean", st.spec.scale_mean},
                            {"scale_std", st.spec.scale_std},
                            {"permutation_segments", st.spec.permutation_segments},
                            {"warp_knots", st.spec.warp_knots},
                            {"warp_std", st.spec.warp_std}});
    for (const auto& st : s.timefreq.steps)
        timefreq.push_back({{"kind", augment::to_string(st.spec.kind)},
                            {"probability", st.probability},
                            {"brightness", detail::range_json(st.spec.brightness)},
                            {"contrast", detail::range_json(st.spec.contrast)},
                            {"saturation", detail::range_json(st.spec.saturation)},
                            {"hue", detail::range_json(st.spec.hue)},
                            {"grayscale_prob", st.spec.grayscale_prob},
                            {"crop_area", detail::range_json(st.spec.crop_area)},
                            {"crop_aspect", detail::range_json(st.spec.crop_aspect)}});
    const auto& f = x.signal_finetune;
    json j = {
        {"corpus", detail::corpus_json(c.corpus)},
        {"output_dir", c.output_dir.string()},
        {"seed", x.seed},
        {"jobs", x.jobs},
        {"split",
         {{"scheme", dataio::to_string(x.scheme)},
          {"val_fraction", x.val_fraction},
          {"test_fraction", x.test_fraction},
          {"fold", c.fold}}},
        {"pretrain",
         {{"objective", contrastive::to_string(s.objective)},
          {"tau", s.tau},
          {"batch_size", s.batch_size},
          {"learning_rate", s.learning_rate},
          {"l2", s.l2},
          {"cache_budget_mb", s.cache_budget_mb},
          {"signal_epochs", s.epochs},
          {"scalogram_epochs", x.scalogram_pretrain.epochs},
          {"per_fold", x.pretrain_per_fold},
          {"scale_grid", {{"scales", s.scale_grid.scales}, {"f_min", s.scale_grid.f_min}, {"f_max", s.scale_grid.f_max}}},
          {"augment",
           {{"mode", s.temporal.mode == augment::PipelineMode::Single ? "paper-ablation" : "composed"},
            {"temporal", temporal},
            {"timefreq", timefreq}}}}},
        {"finetune",
         {{"signal_epochs", f.epochs},
          {"scalogram_epochs", x.scalogram_finetune.epochs},
          {"learning_rate", f.learning_rate},
          {"l2", f.l2},
          {"batch_size", f.batch_size},
          {"unfreeze_last_conv", f.unfreeze_last_conv},
          {"patience", f.patience},
          {"from_scratch", f.from_scratch},
          {"cache_budget_mb", f.cache_budget_mb}}},
        {"fusion", {{"mode", eval::to_string(x.fusion)}, {"weight", x.fusion_weight}}},
    };
    if (c.target_corpus) j["target_corpus"] = detail::corpus_json(*c.target_corpus);
    if (c.checkpoint) j["checkpoint"] = c.checkpoint->string();
    return j;
}

inline json load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigInvalid, "cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigInvalid, "config " + path.string() + " is not valid JSON: " + e.what());
    }
}

/// Applies one `dotted.path=value` override. The value is read as JSON when
/// it parses (numbers, booleans, lists), otherwise as a plain string.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        fail(ErrorCode::ConfigInvalid, "override '" + assignment + "' must look like key.path=value");
    const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &j;
    std::size_t from = 0;
    while (true) {
        const auto dot = path.find('.', from);
        const std::string key = path.substr(from, dot == std::string::npos ? std::string::npos : dot - from);
        if (key.empty()) fail(ErrorCode::ConfigInvalid, "override key '" + path + "' has an empty segment");
        json* next;
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(key);
            } catch (const std::exception&) {
                fail(ErrorCode::ConfigInvalid, "override key '" + path + "' indexes a list with '" + key + "'");
            }
            if (idx >= node->size()) fail(ErrorCode::ConfigInvalid, "override key '" + path + "' is out of range");
            next = &(*node)[idx];
        } else {
            if (!node->is_object() && !node->is_null())
                fail(ErrorCode::ConfigInvalid, "override key '" + path + "' descends into a scalar");
            next = &(*node)[key];
        }
        if (dot == std::string::npos) {
            *next = value;
            return;
        }
        node = next;
        from = dot + 1;
    }
}

struct SweepRun {
    std::string name;  // empty for a plain (non-sweep) run
    json config;
};

/// A config with a `sweep` list expands to one config per entry; each entry
/// maps dotted keys to values (and may carry a `name`).
inline std::vector<SweepRun> expand_sweep(const json& j) {
    if (!j.is_object() || !j.contains("sweep")) return {{"", j}};
    const json& sweep = j.at("sweep");
    if (!sweep.is_array() || sweep.empty()) fail(ErrorCode::ConfigInvalid, "'sweep' must be a non-empty list");
    json base = j;
    base.erase("sweep");
    std::vector<SweepRun> out;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (!sweep[i].is_object()) fail(ErrorCode::ConfigInvalid, "'sweep." + std::to_string(i) + "' must be an object");
        SweepRun run{"sweep_" + std::to_string(i), base};
        for (const auto& [k, v] : sweep[i].items()) {
            if (k == "name") {
                run.name = v.get<std::string>();
                continue;
            }
            apply_override(run.config, k + "=" + v.dump());
        }
        out.push_back(std::move(run));
    }
    return out;
}

inline dataio::RecordingSet load_recordings(const CorpusSpec& c) {
    if (c.synth)
        return dataio::synth_dataset(c.synth->subjects, c.synth->classes, c.synth->windows_per_subject_class,
                                     c.synth->noise_std, c.synth->seed, c.window_len);
    return dataio::load_csv(c.path->string(), c.sample_rate_hz);
}

inline dataio::WindowSet load_corpus(const CorpusSpec& c) {
    return dataio::window(load_recordings(c), c.window_len, c.stride);
}

}  // namespace tfcl::cli

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/contrastive/pretrain.hpp"
#include "tfcl/contrastive/stream.hpp"
#include "tfcl/core/parallel.hpp"
#include "tfcl/core/provenance.hpp"
#include "tfcl/dataio/recording.hpp"
#include "tfcl/dataio/window.hpp"
#include "tfcl/nn/adam.hpp"
#include "tfcl/nn/checkpoint.hpp"

namespace tfcl::downstream {

using contrastive::Stream;

inline double cross_entropy(std::span<const double> probs, int label) {
    require(label >= 0 && static_cast<std::size_t>(label) < probs.size(), ErrorCode::BadLabel,
            "label " + std::to_string(label) + " outside [0, " + std::to_string(probs.size()) + ")");
    return -std::log(probs[static_cast<std::size_t>(label)]);
}

struct FinetuneConfig {
    std::size_t epochs = 70;  // scalogram stream: 50
    double learning_rate = 1e-3;
    double l2 = 1e-4;
    std::size_t batch_size = 128;
    bool unfreeze_last_conv = true;
    std::size_t patience = 10;
    bool from_scratch = false;  // fully supervised baseline: fresh encoder, every layer trained
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::size_t cache_budget_mb = 1536;  // frozen-prefix activations kept across epochs

    void validate() const {
        require(epochs >= 1, ErrorCode::InvalidParams, "fine-tune epochs must be >= 1");
        require(patience >= 1, ErrorCode::InvalidParams, "patience must be >= 1");
        require(batch_size >= 1, ErrorCode::InvalidParams, "fine-tune batch_size must be >= 1");
        require(learning_rate > 0.0, ErrorCode::InvalidParams, "learning rate must be positive");
    }
};

/// One stream's activity classifier: encoder + HAR head (softmax applied on
/// prediction), with everything needed to turn a raw window into input.
struct StreamClassifier {
    Stream stream = Stream::Signal;
    nn::ConvEncoder<float> encoder;
    nn::Mlp<float> head;
    std::optional<wavelet::ScaleGrid> grid;
    std::vector<std::string> labels;

    std::size_t num_classes() const { return labels.size(); }
};

/// Raw encoder input of a window for `stream`; the scalogram path converts
/// with the classifier's grid.
inline std::vector<float> stream_input(Stream stream, const dataio::SignalWindow& w,
                                       const wavelet::CwtPlan* plan) {
    if (stream == Stream::Signal) return contrastive::encoder_input<float>(w);
    require(plan != nullptr, ErrorCode::InvalidParams, "scalogram stream needs a scale grid");
    return contrastive::encoder_input<float>(wavelet::scalogram(w, *plan));
}

inline std::vector<std::vector<float>> stream_inputs(Stream stream, const std::vector<dataio::SignalWindow>& windows,
                                                     const std::optional<wavelet::ScaleGrid>& grid, unsigned jobs) {
    std::vector<std::vector<float>> out(windows.size());
    if (windows.empty()) return out;
    std::optional<wavelet::CwtPlan> plan;
    if (stream == Stream::Scalogram) {
        require(grid.has_value(), ErrorCode::InvalidParams, "scalogram stream needs a scale grid");
        plan.emplace(*grid, windows.front().length());
    }
    parallel_for(windows.size(), jobs,
                 [&](std::size_t i) { out[i] = stream_input(stream, windows[i], plan ? &*plan : nullptr); });
    return out;
}

template <class T>
std::vector<double> softmax_of(const std::vector<T>& logits) {
    const std::vector<double> d(logits.begin(), logits.end());
    return nn::softmax<double>(d);
}

/// Class probabilities for one window; deterministic, no augmentation.
inline std::vector<double> predict_scores(const StreamClassifier& m, const dataio::SignalWindow& w) {
    std::optional<wavelet::CwtPlan> plan;
    if (m.stream == Stream::Scalogram) {
        require(m.grid.has_value(), ErrorCode::InvalidParams, "scalogram classifier has no scale grid");
        plan.emplace(*m.grid, w.length());
    }
    const auto x = stream_input(m.stream, w, plan ? &*plan : nullptr);
    return softmax_of(m.head.forward(m.encoder.forward(x)));
}

inline std::vector<std::vector<double>> predict_all(const StreamClassifier& m,
                                                    const std::vector<dataio::SignalWindow>& windows,
                                                    unsigned jobs = 1) {
    const auto inputs = stream_inputs(m.stream, windows, m.grid, jobs);
    std::vector<std::vector<double>> out(windows.size());
    parallel_for(windows.size(), jobs,
                 [&](std::size_t i) { out[i] = softmax_of(m.head.forward(m.encoder.forward(inputs[i]))); });
    return out;
}

/// Encoder embeddings (96-d) of every window.
inline std::vector<std::vector<float>> embed_all(Stream stream, const nn::ConvEncoder<float>& enc,
                                                 const std::vector<dataio::SignalWindow>& windows,
                                                 const std::optional<wavelet::ScaleGrid>& grid, unsigned jobs = 1) {
    auto inputs = stream_inputs(stream, windows, grid, jobs);
    std::vector<std::vector<float>> out(windows.size());
    parallel_for(windows.size(), jobs, [&](std::size_t i) {
        out[i] = enc.forward(inputs[i]);
        inputs[i] = {};
    });
    return out;
}

inline std::size_t argmax_lowest(std::span<const double> p) {
    require(!p.empty(), ErrorCode::BadShape, "argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

struct TrainReport {
    nlohmann::json history = nlohmann::json::array();  // per epoch: train_loss, val_loss
    std::size_t best_epoch = 0;                         // 1-based; 0 when never evaluated
    double best_val_loss = INFINITY;
    bool stopped_early = false;
};

/// Labeled examples staged at some depth of the network: either encoder
/// activations entering layer `start`, or final embeddings when there is no
/// trainable encoder part.
struct StagedData {
    std::vector<std::vector<float>> x;
    std::vector<int> y;
    std::vector<std::string> subjects;
};

namespace detail {

/// Mean cross-entropy of a staged set and, when `grads` are given, the
/// gradients of the batch `idx` (mean over it).
struct Trainable {
    nn::ConvEncoder<float>* encoder = nullptr;  // null: x are embeddings
    std::size_t start = 0;                      // encoder layer the staged x enter
    std::size_t first_trainable = 0;
    nn::Mlp<float>* head = nullptr;
    unsigned jobs = 1;

    bool encoder_in_graph() const { return encoder && start < encoder->layer_count(); }
    bool encoder_trains() const { return encoder_in_graph() && first_trainable < encoder->layer_count(); }

    std::vector<double> probs(const std::vector<float>& x) const {
        const auto e = encoder_in_graph() ? encoder->forward_from(start, x) : x;
        return softmax_of(head->forward(e));
    }

    double mean_loss(const StagedData& d) const {
        std::vector<double> l(d.x.size());
        parallel_for(d.x.size(), jobs, [&](std::size_t i) { l[i] = cross_entropy(probs(d.x[i]), d.y[i]); });
        double s = 0.0;
        for (double v : l) s += v;
        return d.x.empty() ? 0.0 : s / static_cast<double>(d.x.size());
    }

    double batch_grads(const StagedData& d, const std::vector<std::size_t>& idx, nn::ParamSet<float>& g_enc,
                       nn::ParamSet<float>& g_head) const {
        const std::size_t B = idx.size();
        std::vector<nn::ParamSet<float>> ge(B), gh(B);
        std::vector<double> losses(B);
        parallel_for(B, jobs, [&](std::size_t b) {
            const std::size_t i = idx[b];
            typename nn::ConvEncoder<float>::Cache ec;
            typename nn::Mlp<float>::Cache hc;
            const auto e = encoder_in_graph() ? encoder->forward_from(start, d.x[i], &ec) : d.x[i];
            const auto logits = head->forward(e, &hc);
            const auto p = softmax_of(logits);
            losses[b] = cross_entropy(p, d.y[i]);
            std::vector<float> dl(p.size());
            for (std::size_t c = 0; c < p.size(); ++c)
                dl[c] = static_cast<float>((p[c] - (static_cast<int>(c) == d.y[i] ? 1.0 : 0.0)) /
                                           static_cast<double>(B));
            gh[b] = g_head.zeros_like();
            const auto de = head->backward(hc, dl, &gh[b]);
            if (encoder_trains()) {
                ge[b] = g_enc.zeros_like();
                encoder->backward(ec, de, ge[b], first_trainable);
            }
        });
        double loss = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            loss += losses[b];
            auto acc = [](nn::ParamSet<float>& a, const nn::ParamSet<float>& x) {
                for (std::size_t k = 0; k < a.count(); ++k)
                    for (std::size_t j = 0; j < a[k].size(); ++j) a[k].value[j] += x[k].value[j];
            };
            acc(g_head, gh[b]);
            if (encoder_trains()) acc(g_enc, ge[b]);
        }
        return loss / static_cast<double>(B);
    }
};

inline constexpr std::uint64_t kFinetuneStream = 0xf17e;

}  // namespace detail

/// Mini-batch Adam on the staged training set with early stopping on the
/// validation loss: training stops after `patience` epochs without a new
/// minimum and the best-validation weights are restored. Without validation
/// data every epoch runs and the final weights are kept.
inline TrainReport train_classifier(detail::Trainable t, const StagedData& train, const StagedData& val,
                                    const FinetuneConfig& cfg, ProvenanceAudit* audit) {
    cfg.validate();
    require(!train.x.empty(), ErrorCode::InsufficientData, "no labeled training windows");
    const nn::AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-7, cfg.l2};
    nn::ParamSet<float> empty;
    nn::ParamSet<float>& enc_params = t.encoder ? t.encoder->params() : empty;
    std::vector<bool> mask(enc_params.count(), false);
    if (t.encoder_trains())
        for (std::size_t l = t.first_trainable; l < t.encoder->layer_count(); ++l) {
            auto [wi, bi] = t.encoder->layer_params(l);
            mask[wi] = mask[bi] = true;
        }
    nn::AdamState<float> s_enc(enc_params), s_head(t.head->params());
    TrainReport report;
    nn::ParamSet<float> best_enc = enc_params, best_head = t.head->params();
    std::size_t since_best = 0;
    const RngStream root(cfg.seed, detail::kFinetuneStream);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream shuffle = root.split(epoch);
        const auto order = shuffle.permutation(train.x.size());
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t from = 0; from < order.size(); from += cfg.batch_size) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(from),
                                               order.begin() + static_cast<std::ptrdiff_t>(
                                                                   std::min(order.size(), from + cfg.batch_size)));
            if (audit)
                for (std::size_t i : idx) audit->check(train.subjects[i]);
            auto g_enc = enc_params.zeros_like();
            auto g_head = t.head->params().zeros_like();
            const double l = t.batch_grads(train, idx, g_enc, g_head);
            require(std::isfinite(l), ErrorCode::NonfiniteLoss,
                    "fine-tuning loss is not finite at epoch " + std::to_string(epoch + 1));
            if (t.encoder_trains()) nn::adam_step(enc_params, g_enc, s_enc, adam, &mask);
            nn::adam_step(t.head->params(), g_head, s_head, adam);
            loss_sum += l;
            ++batches;
        }
        nlohmann::json rec = {{"epoch", epoch + 1}, {"train_loss", loss_sum / static_cast<double>(batches)}};
        if (!val.x.empty()) {
            if (audit)
                for (const auto& s : val.subjects) audit->check(s);
            const double vl = t.mean_loss(val);
            rec["val_loss"] = vl;
            if (vl < report.best_val_loss) {
                report.best_val_loss = vl;
                report.best_epoch = epoch + 1;
                best_enc = enc_params;
                best_head = t.head->params();
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                report.history.push_back(rec);
                report.stopped_early = true;
                break;
            }
        }
        report.history.push_back(rec);
    }
    if (report.best_epoch > 0) {
        enc_params = best_enc;
        t.head->params() = best_head;
    }
    return report;
}

struct FinetuneResult {
    StreamClassifier model;
    TrainReport report;
    std::size_t first_trainable_layer = 0;
};

namespace detail {

/// Stages inputs at layer `start`: frozen layers below it run once.
inline StagedData stage(const nn::ConvEncoder<float>& enc, std::size_t start, std::vector<std::vector<float>> inputs,
                        const std::vector<dataio::SignalWindow>& windows, unsigned jobs) {
    StagedData d;
    d.x = std::move(inputs);
    if (start > 0)
        parallel_for(d.x.size(), jobs, [&](std::size_t i) {
            d.x[i] = start >= enc.layer_count() ? enc.forward(d.x[i]) : enc.prefix(d.x[i], start);
        });
    for (const auto& w : windows) {
        require(w.label.has_value(), ErrorCode::LabelsMissing, "fine-tuning window has no label");
        d.y.push_back(*w.label);
        d.subjects.push_back(w.subject);
    }
    return d;
}

}  // namespace detail

/// Fine-tunes a fresh HAR head (and optionally the final conv layer) on top
/// of `encoder`. Frozen encoder layers are never touched. Inputs below the
/// first trainable layer are computed once and kept when they fit the cache
/// budget.
inline FinetuneResult finetune(Stream stream, const nn::ConvEncoder<float>& encoder,
                               const std::optional<wavelet::ScaleGrid>& grid, const std::vector<std::string>& labels,
                               const std::vector<dataio::SignalWindow>& train,
                               const std::vector<dataio::SignalWindow>& val, const FinetuneConfig& cfg,
                               ProvenanceAudit* audit = nullptr) {
    cfg.validate();
    require(labels.size() >= 2, ErrorCode::InvalidParams, "classification needs at least 2 classes");
    require(!train.empty(), ErrorCode::InsufficientData, "no labeled training windows");
    for (const auto* set : {&train, &val})
        for (const auto& w : *set)
            require(w.label.has_value() && *w.label >= 0 && static_cast<std::size_t>(*w.label) < labels.size(),
                    ErrorCode::LabelsMissing, "window label outside the label map");
    const RngStream seeds(cfg.seed, 0x4ead);
    FinetuneResult r;
    r.model.stream = stream;
    r.model.grid = grid;
    r.model.labels = labels;
    r.model.encoder = cfg.from_scratch
                          ? nn::ConvEncoder<float>(encoder.config(), seeds.split(1).engine()())
                          : encoder;
    r.model.head = nn::Mlp<float>(nn::mlp_widths("har_head", labels.size()), seeds.split(0).engine()());
    auto& enc = r.model.encoder;
    const std::size_t L = enc.layer_count();
    r.first_trainable_layer = cfg.from_scratch ? 0 : (cfg.unfreeze_last_conv ? L - 1 : L);

    // stage at the first trainable layer when the activations fit the budget
    std::size_t start = r.first_trainable_layer;
    const std::size_t per = start >= L ? enc.embedding_dim() : enc.input_size_of(start);
    if ((train.size() + val.size()) * per * sizeof(float) > cfg.cache_budget_mb * (std::size_t{1} << 20)) start = 0;
    const auto train_d = detail::stage(enc, start, stream_inputs(stream, train, grid, cfg.jobs), train, cfg.jobs);
    const auto val_d = detail::stage(enc, start, stream_inputs(stream, val, grid, cfg.jobs), val, cfg.jobs);

    detail::Trainable t{&enc, start, r.first_trainable_layer, &r.model.head, cfg.jobs};
    r.report = train_classifier(t, train_d, val_d, cfg, audit);
    return r;
}

/// Checkpoint entries for a fine-tuned stream: encoder + HAR head.
inline void append_to_checkpoint(nn::Checkpoint& c, const StreamClassifier& m) {
    const std::string s = contrastive::to_string(m.stream);
    c.components.push_back(
        {s + ".encoder", contrastive::encoder_arch(m.stream), nn::component_config(m.encoder), m.encoder.params()});
    c.components.push_back({s + ".har_head", "har_head", nn::component_config(m.head), m.head.params()});
    c.label_map = m.labels;
    if (m.grid) c.extra["scale_grid"] = contrastive::to_json(*m.grid);
}

/// Rebuilds a stream classifier from a checkpoint holding
/// "<stream>.encoder" and "<stream>.har_head".
inline StreamClassifier classifier_from_checkpoint(const nn::Checkpoint& c, Stream stream) {
    const std::string s = contrastive::to_string(stream);
    const auto& ec = c.at(s + ".encoder");
    const auto& hc = c.at(s + ".har_head");
    StreamClassifier m;
    m.stream = stream;
    m.encoder = nn::ConvEncoder<float>(nn::encoder_config_from_json(ec.arch, ec.config));
    m.encoder.params() = ec.params;
    m.head = nn::Mlp<float>(hc.config.at("widths").get<std::vector<std::size_t>>());
    m.head.params() = hc.params;
    m.labels = c.label_map;
    require(m.head.output_dim() == m.labels.size(), ErrorCode::CorruptManifest,
            "HAR head width does not match the label map");
    if (stream == Stream::Scalogram) m.grid = contrastive::scale_grid_from_json(c.extra.at("scale_grid"));
    return m;
}

/// Encoder (and its grid) from a pretraining checkpoint.
inline nn::ConvEncoder<float> encoder_from_checkpoint(const nn::Checkpoint& c, Stream stream) {
    const auto& ec = c.at(contrastive::to_string(stream) + ".encoder");
    nn::ConvEncoder<float> e(nn::encoder_config_from_json(ec.arch, ec.config));
    e.params() = ec.params;
    return e;
}

}  // namespace tfcl::downstream

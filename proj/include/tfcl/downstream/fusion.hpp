#pragma once

#include <string>
#include <vector>

#include "tfcl/downstream/finetune.hpp"

namespace tfcl::downstream {

/// Late fusion: weight * p_signal + (1 - weight) * p_scalogram.
inline std::vector<double> fuse_scores(std::span<const double> signal, std::span<const double> scalogram,
                                       double weight = 0.5) {
    require(signal.size() == scalogram.size(), ErrorCode::LengthMismatch,
            "score vectors have " + std::to_string(signal.size()) + " and " + std::to_string(scalogram.size()) +
                " classes");
    require(weight >= 0.0 && weight <= 1.0, ErrorCode::InvalidParams, "fusion weight must lie in [0, 1]");
    std::vector<double> out(signal.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = weight * signal[i] + (1.0 - weight) * scalogram[i];
    return out;
}

/// Predicted class of fused scores; ties go to the lowest class index.
inline std::size_t fused_class(std::span<const double> signal, std::span<const double> scalogram,
                               double weight = 0.5) {
    const auto f = fuse_scores(signal, scalogram, weight);
    return argmax_lowest(f);
}

/// Concatenated [signal | scalogram] embedding.
inline std::vector<float> fuse_features(std::span<const float> signal, std::span<const float> scalogram) {
    std::vector<float> out(signal.begin(), signal.end());
    out.insert(out.end(), scalogram.begin(), scalogram.end());
    return out;
}

/// Feature fusion: both stream encoders frozen, a small head on the
/// concatenated embeddings.
struct FusionModel {
    nn::ConvEncoder<float> signal_encoder;
    nn::ConvEncoder<float> scalogram_encoder;
    wavelet::ScaleGrid grid;
    nn::Mlp<float> head;
    std::vector<std::string> labels;
};

inline std::vector<std::vector<float>> fused_embeddings(const nn::ConvEncoder<float>& signal_encoder,
                                                        const nn::ConvEncoder<float>& scalogram_encoder,
                                                        const wavelet::ScaleGrid& grid,
                                                        const std::vector<dataio::SignalWindow>& windows,
                                                        unsigned jobs = 1) {
    const auto a = embed_all(Stream::Signal, signal_encoder, windows, std::nullopt, jobs);
    const auto b = embed_all(Stream::Scalogram, scalogram_encoder, windows, grid, jobs);
    std::vector<std::vector<float>> out(windows.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fuse_features(a[i], b[i]);
    return out;
}

struct FusionResult {
    FusionModel model;
    TrainReport report;
};

/// Trains the fusion head on top of two stream encoders (typically the
/// fine-tuned ones); encoder weights are not modified.
inline FusionResult train_fusion(const StreamClassifier& signal, const StreamClassifier& scalogram,
                                 const std::vector<dataio::SignalWindow>& train,
                                 const std::vector<dataio::SignalWindow>& val, const FinetuneConfig& cfg,
                                 ProvenanceAudit* audit = nullptr) {
    require(signal.stream == Stream::Signal && scalogram.stream == Stream::Scalogram, ErrorCode::InvalidParams,
            "fusion needs one signal and one scalogram classifier");
    require(signal.labels == scalogram.labels, ErrorCode::InvalidParams, "stream classifiers disagree on labels");
    require(scalogram.grid.has_value(), ErrorCode::InvalidParams, "scalogram classifier has no scale grid");
    require(!train.empty(), ErrorCode::InsufficientData, "no labeled training windows");
    FusionResult r;
    r.model.signal_encoder = signal.encoder;
    r.model.scalogram_encoder = scalogram.encoder;
    r.model.grid = *scalogram.grid;
    r.model.labels = signal.labels;
    r.model.head = nn::Mlp<float>(nn::mlp_widths("fusion_head", signal.labels.size()),
                                  RngStream(cfg.seed, 0xf05e).engine()());
    auto stage = [&](const std::vector<dataio::SignalWindow>& ws) {
        StagedData d;
        d.x = fused_embeddings(r.model.signal_encoder, r.model.scalogram_encoder, r.model.grid, ws, cfg.jobs);
        for (const auto& w : ws) {
            require(w.label.has_value() && *w.label >= 0 &&
                        static_cast<std::size_t>(*w.label) < r.model.labels.size(),
                    ErrorCode::LabelsMissing, "window label outside the label map");
            d.y.push_back(*w.label);
            d.subjects.push_back(w.subject);
        }
        return d;
    };
    const auto train_d = stage(train);
    const auto val_d = stage(val);
    detail::Trainable t{nullptr, 0, 0, &r.model.head, cfg.jobs};
    r.report = train_classifier(t, train_d, val_d, cfg, audit);
    return r;
}

inline std::vector<std::vector<double>> predict_fusion(const FusionModel& m,
                                                       const std::vector<dataio::SignalWindow>& windows,
                                                       unsigned jobs = 1) {
    const auto f = fused_embeddings(m.signal_encoder, m.scalogram_encoder, m.grid, windows, jobs);
    std::vector<std::vector<double>> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = softmax_of(m.head.forward(f[i]));
    return out;
}

inline void append_to_checkpoint(nn::Checkpoint& c, const FusionModel& m) {
    c.components.push_back({"fusion.signal_encoder", "signal_encoder", nn::component_config(m.signal_encoder),
                            m.signal_encoder.params()});
    c.components.push_back({"fusion.scalogram_encoder", "scalogram_encoder",
                            nn::component_config(m.scalogram_encoder), m.scalogram_encoder.params()});
    c.components.push_back({"fusion.head", "fusion_head", nn::component_config(m.head), m.head.params()});
    c.label_map = m.labels;
    c.extra["scale_grid"] = contrastive::to_json(m.grid);
}

}  // namespace tfcl::downstream

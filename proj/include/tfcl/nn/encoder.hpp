#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/core/error.hpp"
#include "tfcl/nn/conv.hpp"
#include "tfcl/nn/params.hpp"

namespace tfcl::nn {

struct ConvLayerSpec {
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t filters = 1;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// Stack of valid stride-1 convolutions, ReLU after each, then a global
/// max-pool over all spatial positions.
struct EncoderConfig {
    std::string arch;
    std::size_t in_channels = 3;
    std::size_t in_h = 1;
    std::size_t in_w = 128;
    std::vector<ConvLayerSpec> layers;

    std::size_t input_size() const { return in_channels * in_h * in_w; }
    std::size_t embedding_dim() const { return layers.empty() ? 0 : layers.back().filters; }

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline nlohmann::json to_json(const EncoderConfig& c) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : c.layers) layers.push_back({l.kernel_h, l.kernel_w, l.filters});
    return {{"in_channels", c.in_channels}, {"in_h", c.in_h}, {"in_w", c.in_w}, {"layers", layers}};
}

inline EncoderConfig encoder_config_from_json(const std::string& arch, const nlohmann::json& j) {
    EncoderConfig c;
    c.arch = arch;
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.in_h = j.at("in_h").get<std::size_t>();
    c.in_w = j.at("in_w").get<std::size_t>();
    for (const auto& l : j.at("layers"))
        c.layers.push_back({l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>(), l.at(2).get<std::size_t>()});
    return c;
}

/// 1-D signal encoder on a (3, 1, 128) input: kernels 12, 8, 8 with 32, 64,
/// 96 filters. Time lengths 128 -> 117 -> 110 -> 103.
inline EncoderConfig signal_encoder_config() {
    return {"signal_encoder", 3, 1, 128, {{1, 12, 32}, {1, 8, 64}, {1, 8, 96}}};
}

/// 2-D scalogram encoder on a (3, 128, 128) input: kernels 8x8, 4x4, 4x4 with
/// 32, 64, 96 filters. Spatial sizes 128 -> 121 -> 118 -> 115.
inline EncoderConfig scalogram_encoder_config() {
    return {"scalogram_encoder", 3, 128, 128, {{8, 8, 32}, {4, 4, 64}, {4, 4, 96}}};
}

template <class T>
class ConvEncoder {
public:
    /// Activations kept from a forward pass that starts at layer `start`.
    struct Cache {
        std::size_t start = 0;
        std::vector<std::vector<T>> inputs;  // inputs[i] feeds layer start + i
        std::vector<std::size_t> argmax;     // last-layer position of each filter's maximum
        std::vector<bool> active;            // maximum > 0, i.e. ReLU passes it
    };

    ConvEncoder() = default;

    explicit ConvEncoder(EncoderConfig config, std::uint64_t seed = 0) : config_(std::move(config)) {
        require(!config_.layers.empty(), ErrorCode::BadShape, "encoder needs at least one layer");
        std::size_t c = config_.in_channels, h = config_.in_h, w = config_.in_w;
        for (std::size_t i = 0; i < config_.layers.size(); ++i) {
            const auto& l = config_.layers[i];
            ConvGeom g{c, h, w, l.kernel_h, l.kernel_w, l.filters};
            g.validate();
            geoms_.push_back(g);
            const std::string prefix = "conv" + std::to_string(i + 1);
            params_.add(prefix + ".weight", {l.filters, c, l.kernel_h, l.kernel_w}, true, g.patch(),
                        l.filters * l.kernel_h * l.kernel_w);
            params_.add(prefix + ".bias", {l.filters});
            c = l.filters;
            h = g.out_h();
            w = g.out_w();
        }
        glorot_init(params_, seed);
    }

    const EncoderConfig& config() const noexcept { return config_; }
    const std::vector<ConvGeom>& geoms() const noexcept { return geoms_; }
    std::size_t layer_count() const noexcept { return geoms_.size(); }
    std::size_t embedding_dim() const noexcept { return config_.embedding_dim(); }
    ParamSet<T>& params() noexcept { return params_; }
    const ParamSet<T>& params() const noexcept { return params_; }

    /// Size of the activation that feeds layer `layer` (layer 0: raw input).
    std::size_t input_size_of(std::size_t layer) const { return geoms_.at(layer).in_size(); }

    /// Parameter indices owned by conv layer `layer` (weight, bias).
    std::pair<std::size_t, std::size_t> layer_params(std::size_t layer) const { return {2 * layer, 2 * layer + 1}; }

    /// Runs layers [0, count) and returns the post-ReLU activation; used to
    /// cache the frozen part of the network.
    std::vector<T> prefix(std::span<const T> input, std::size_t count) const {
        check_input(input, 0);
        std::vector<T> act(input.begin(), input.end());
        for (std::size_t l = 0; l < count; ++l) {
            std::vector<T> out(geoms_[l].out_size());
            conv_forward(geoms_[l], weight(l), bias(l), act.data(), out.data());
            for (auto& v : out) v = v > T(0) ? v : T(0);
            act = std::move(out);
        }
        return act;
    }

    std::vector<T> forward(std::span<const T> input, Cache* cache = nullptr) const {
        return forward_from(0, input, cache);
    }

    /// Forward pass starting at layer `start` whose input is `input`.
    std::vector<T> forward_from(std::size_t start, std::span<const T> input, Cache* cache = nullptr) const {
        check_input(input, start);
        if (cache) {
            cache->start = start;
            cache->inputs.clear();
            cache->inputs.emplace_back(input.begin(), input.end());
        }
        std::vector<T> act(input.begin(), input.end());
        const std::size_t last = geoms_.size() - 1;
        for (std::size_t l = start; l < last; ++l) {
            std::vector<T> out(geoms_[l].out_size());
            conv_forward(geoms_[l], weight(l), bias(l), act.data(), out.data());
            for (auto& v : out) v = v > T(0) ? v : T(0);
            act = std::move(out);
            if (cache) cache->inputs.push_back(act);
        }
        const ConvGeom& g = geoms_[last];
        std::vector<T> pre(g.out_size());
        conv_forward(g, weight(last), bias(last), act.data(), pre.data());
        const std::size_t P = g.positions();
        std::vector<T> embedding(g.out_c);
        if (cache) {
            cache->argmax.assign(g.out_c, 0);
            cache->active.assign(g.out_c, false);
        }
        for (std::size_t o = 0; o < g.out_c; ++o) {
            const T* row = pre.data() + o * P;
            const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + P) - row);
            embedding[o] = row[best] > T(0) ? row[best] : T(0);
            if (cache) {
                cache->argmax[o] = best;
                cache->active[o] = row[best] > T(0);
            }
        }
        return embedding;
    }

    /// Accumulates parameter gradients for layers >= first_trainable into
    /// `grads` (same layout as params()). Returns d(loss)/d(input of layer
    /// cache.start) when `want_input_grad`, otherwise an empty vector.
    std::vector<T> backward(const Cache& cache, std::span<const T> d_embedding, ParamSet<T>& grads,
                            std::size_t first_trainable = 0, bool want_input_grad = false) const {
        require(d_embedding.size() == embedding_dim(), ErrorCode::BadShape, "embedding gradient has wrong size");
        require(first_trainable >= cache.start || want_input_grad, ErrorCode::InvalidParams,
                "cannot train layers that precede the cached activation");
        const std::size_t last = geoms_.size() - 1;
        const std::size_t stop = want_input_grad ? cache.start : std::max(first_trainable, cache.start);
        if (stop > last) return {};
        // global max-pool + ReLU: the gradient lands on one position per filter
        const ConvGeom& g = geoms_[last];
        std::vector<T> d_pre(g.out_size(), T(0));
        for (std::size_t o = 0; o < g.out_c; ++o)
            if (cache.active[o]) d_pre[o * g.positions() + cache.argmax[o]] = d_embedding[o];
        for (std::size_t l = last + 1; l-- > stop;) {
            const auto& in = cache.inputs.at(l - cache.start);
            const bool trainable = l >= first_trainable;
            const bool need_din = l > stop;
            auto [wi, bi] = layer_params(l);
            std::vector<T> d_in(need_din ? geoms_[l].in_size() : 0);
            if (trainable) {
                conv_backward(geoms_[l], weight(l), in.data(), d_pre.data(), grads[wi].value.data(),
                              grads[bi].value.data(), need_din ? d_in.data() : nullptr);
            } else {
                std::vector<T> dw(grads[wi].size()), db(grads[bi].size());
                conv_backward(geoms_[l], weight(l), in.data(), d_pre.data(), dw.data(), db.data(),
                              need_din ? d_in.data() : nullptr);
            }
            if (!need_din) {
                if (want_input_grad && l == cache.start) return {};
                break;
            }
            // ReLU mask of the layer below: its output is this layer's input
            for (std::size_t i = 0; i < d_in.size(); ++i)
                if (in[i] <= T(0) && l - 1 >= cache.start) d_in[i] = T(0);
            d_pre = std::move(d_in);
        }
        return {};
    }

    /// Gradient with respect to the raw input (layer 0 cache required).
    std::vector<T> input_gradient(const Cache& cache, std::span<const T> d_embedding) const {
        require(cache.start == 0, ErrorCode::InvalidParams, "input gradient needs a full forward cache");
        ParamSet<T> scratch = params_.zeros_like();
        const std::size_t last = geoms_.size() - 1;
        const ConvGeom& g = geoms_[last];
        std::vector<T> d_pre(g.out_size(), T(0));
        for (std::size_t o = 0; o < g.out_c; ++o)
            if (cache.active[o]) d_pre[o * g.positions() + cache.argmax[o]] = d_embedding[o];
        for (std::size_t l = last + 1; l-- > 0;) {
            const auto& in = cache.inputs.at(l);
            auto [wi, bi] = layer_params(l);
            std::vector<T> d_in(geoms_[l].in_size());
            conv_backward(geoms_[l], weight(l), in.data(), d_pre.data(), scratch[wi].value.data(),
                          scratch[bi].value.data(), d_in.data());
            if (l == 0) return d_in;
            for (std::size_t i = 0; i < d_in.size(); ++i)
                if (in[i] <= T(0)) d_in[i] = T(0);
            d_pre = std::move(d_in);
        }
        return {};
    }

private:
    void check_input(std::span<const T> input, std::size_t layer) const {
        require(layer < geoms_.size(), ErrorCode::BadShape, "layer index out of range");
        require(input.size() == geoms_[layer].in_size(), ErrorCode::BadShape,
                config_.arch + ": expected input of " + std::to_string(geoms_[layer].in_size()) + " values, got " +
                    std::to_string(input.size()));
    }

    const T* weight(std::size_t l) const { return params_[2 * l].value.data(); }
    const T* bias(std::size_t l) const { return params_[2 * l + 1].value.data(); }

    EncoderConfig config_;
    std::vector<ConvGeom> geoms_;
    ParamSet<T> params_;
};

}  // namespace tfcl::nn

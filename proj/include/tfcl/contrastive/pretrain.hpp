#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/augment/views.hpp"
#include "tfcl/contrastive/losses.hpp"
#include "tfcl/contrastive/stream.hpp"
#include "tfcl/core/parallel.hpp"
#include "tfcl/core/provenance.hpp"
#include "tfcl/nn/adam.hpp"
#include "tfcl/nn/checkpoint.hpp"

namespace tfcl::contrastive {

enum class Objective { NtXent, StopGrad };

inline std::string to_string(Objective o) { return o == Objective::NtXent ? "ntxent" : "stopgrad"; }

inline Objective objective_from_string(const std::string& s) {
    if (s == "ntxent") return Objective::NtXent;
    if (s == "stopgrad") return Objective::StopGrad;
    fail(ErrorCode::ConfigInvalid, "unknown objective '" + s + "'");
}

/// Default pipelines: every transform of the family, each with p = 0.5.
inline augment::TemporalPipeline default_temporal_pipeline() {
    augment::TemporalPipeline p;
    for (auto k : augment::kAllTemporalKinds) {
        augment::TemporalSpec s;
        s.kind = k;
        p.steps.push_back({s, 0.5});
    }
    return p;
}

inline augment::TimeFreqPipeline default_timefreq_pipeline() {
    augment::TimeFreqPipeline p;
    for (auto k : augment::kAllTimeFreqKinds) {
        augment::TimeFreqSpec s;
        s.kind = k;
        p.steps.push_back({s, 0.5});
    }
    return p;
}

struct PretrainConfig {
    Stream learner = Stream::Signal;
    Objective objective = Objective::NtXent;
    std::size_t batch_size = 128;
    std::size_t epochs = 150;  // scalogram learner: 50
    double learning_rate = 1e-3;
    double l2 = 1e-4;
    double tau = 0.5;
    augment::TemporalPipeline temporal = default_temporal_pipeline();
    augment::TimeFreqPipeline timefreq = default_timefreq_pipeline();
    ScaleGridSpec scale_grid;
    std::uint64_t seed = 0;
    unsigned jobs = 1;                 // batch items encoded concurrently
    std::size_t cache_budget_mb = 1024;  // above this, activations are recomputed for backward

    void validate() const {
        require(batch_size >= 2, ErrorCode::InvalidParams, "pretraining batch_size must be >= 2");
        require(epochs >= 1, ErrorCode::InvalidParams, "pretraining epochs must be >= 1");
        require(tau > 0.0, ErrorCode::InvalidParams, "temperature must be positive");
        require(learning_rate > 0.0, ErrorCode::InvalidParams, "learning rate must be positive");
    }
};

/// Encoder + projection head (+ predictor for the stop-gradient objective).
template <class T>
struct PretextModel {
    nn::ConvEncoder<T> encoder;
    nn::Mlp<T> projection;
    std::optional<nn::Mlp<T>> predictor;

    static PretextModel create(const nn::EncoderConfig& enc, Objective objective, std::uint64_t seed) {
        RngStream seeds(seed, 0x1b1);
        PretextModel m{nn::ConvEncoder<T>(enc, seeds.split(0).engine()()),
                       nn::Mlp<T>(nn::mlp_widths("projection_head"), seeds.split(1).engine()()),
                       std::nullopt};
        if (objective == Objective::StopGrad)
            m.predictor.emplace(nn::mlp_widths("predictor_head"), seeds.split(2).engine()());
        return m;
    }

    std::vector<T> flatten() const {
        auto out = encoder.params().flatten();
        const auto p = projection.params().flatten();
        out.insert(out.end(), p.begin(), p.end());
        if (predictor) {
            const auto q = predictor->params().flatten();
            out.insert(out.end(), q.begin(), q.end());
        }
        return out;
    }

    void assign(std::span<const T> flat) {
        std::size_t offset = 0;
        auto take = [&](nn::ParamSet<T>& ps) {
            const std::size_t n = ps.flat_size();
            require(offset + n <= flat.size(), ErrorCode::SizeMismatch, "flat model vector too short");
            ps.assign(flat.subspan(offset, n));
            offset += n;
        };
        take(encoder.params());
        take(projection.params());
        if (predictor) take(predictor->params());
        require(offset == flat.size(), ErrorCode::SizeMismatch, "flat model vector too long");
    }
};

template <class T>
struct PretextGrads {
    nn::ParamSet<T> encoder, projection, predictor;

    explicit PretextGrads(const PretextModel<T>& m)
        : encoder(m.encoder.params().zeros_like()), projection(m.projection.params().zeros_like()) {
        if (m.predictor) predictor = m.predictor->params().zeros_like();
    }

    void add(const PretextGrads& o) {
        auto acc = [](nn::ParamSet<T>& a, const nn::ParamSet<T>& b) {
            for (std::size_t i = 0; i < a.count(); ++i)
                for (std::size_t k = 0; k < a[i].size(); ++k) a[i].value[k] += b[i].value[k];
        };
        acc(encoder, o.encoder);
        acc(projection, o.projection);
        acc(predictor, o.predictor);
    }

    std::vector<T> flatten() const {
        auto out = encoder.flatten();
        for (const auto* ps : {&projection, &predictor}) {
            const auto f = ps->flatten();
            out.insert(out.end(), f.begin(), f.end());
        }
        return out;
    }
};

/// Below this mean per-dimension spread of L2-normalized latents an epoch is
/// flagged as collapsed (all samples mapped to nearly one direction).
inline constexpr double kCollapseThreshold = 0.01;

struct PretextStats {
    double loss = 0.0;
    double embedding_std = 0.0;  // mean per-dimension std of L2-normalized latents
};

namespace detail {

template <class T>
double normalized_std(const std::vector<std::vector<T>>& z) {
    const std::size_t n = z.size(), d = z.front().size();
    std::vector<double> mean(d, 0.0), sq(d, 0.0);
    for (const auto& row : z) {
        double nr = 0.0;
        for (T v : row) nr += static_cast<double>(v) * static_cast<double>(v);
        nr = std::sqrt(nr);
        for (std::size_t c = 0; c < d; ++c) {
            const double u = nr > 0.0 ? static_cast<double>(row[c]) / nr : 0.0;
            mean[c] += u;
            sq[c] += u * u;
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        const double m = mean[c] / static_cast<double>(n);
        total += std::sqrt(std::max(0.0, sq[c] / static_cast<double>(n) - m * m));
    }
    return total / static_cast<double>(d);
}

}  // namespace detail

/// Loss of one batch of view pairs (views[2k], views[2k+1] come from sample
/// k) and, when `grads` is non-null, its gradient for every parameter.
/// Per-item gradients are reduced in item order, so the result does not
/// depend on `jobs`. `fixed_targets` replaces the stop-gradient targets by
/// constants, which lets finite differences see the same function the
/// analytic gradient describes.
template <class T>
PretextStats pretext_loss(const PretextModel<T>& m, const std::vector<std::vector<T>>& views, Objective objective,
                          double tau, PretextGrads<T>* grads, unsigned jobs = 1, std::size_t cache_budget_mb = 1024,
                          const std::vector<std::vector<T>>* fixed_targets = nullptr) {
    require(views.size() >= 2 && views.size() % 2 == 0, ErrorCode::InvalidParams, "views must come in pairs");
    using EncCache = typename nn::ConvEncoder<T>::Cache;
    using MlpCache = typename nn::Mlp<T>::Cache;
    const std::size_t n = views.size(), items = n / 2;
    std::size_t cache_floats = 0;
    for (std::size_t l = 0; l < m.encoder.layer_count(); ++l) cache_floats += m.encoder.input_size_of(l);
    const bool keep = grads && n * cache_floats * sizeof(T) <= cache_budget_mb * (std::size_t{1} << 20);

    std::vector<EncCache> enc_cache(keep ? n : 0);
    std::vector<MlpCache> proj_cache(n), pred_cache(n);
    std::vector<std::vector<T>> z(n), p(n);
    parallel_for(n, jobs, [&](std::size_t v) {
        const auto e = m.encoder.forward(views[v], keep ? &enc_cache[v] : nullptr);
        z[v] = m.projection.forward(e, &proj_cache[v]);
        if (objective == Objective::StopGrad) p[v] = m.predictor->forward(z[v], &pred_cache[v]);
    });

    PretextStats stats;
    stats.embedding_std = detail::normalized_std(z);
    std::vector<std::vector<double>> dz(n), dp(n);
    if (objective == Objective::NtXent) {
        LatentBatch<double> b;
        b.tau = tau;
        for (const auto& row : z) b.z.emplace_back(row.begin(), row.end());
        stats.loss = ntxent_batch_loss(b, grads ? &dz : nullptr);
    } else {
        require(m.predictor.has_value(), ErrorCode::InvalidParams, "stop-gradient objective needs a predictor");
        for (std::size_t k = 0; k < items; ++k) {
            auto cvt = [](const std::vector<T>& v) { return std::vector<double>(v.begin(), v.end()); };
            const auto& tz = fixed_targets ? *fixed_targets : z;
            const auto z1 = cvt(tz[2 * k]), z2 = cvt(tz[2 * k + 1]), p1 = cvt(p[2 * k]), p2 = cvt(p[2 * k + 1]);
            StopgradGrads<double> g;
            stats.loss += stopgrad_loss<double>(z1, z2, p1, p2, grads ? &g : nullptr) / static_cast<double>(items);
            if (grads) {
                for (auto& v : g.d_p1) v /= static_cast<double>(items);
                for (auto& v : g.d_p2) v /= static_cast<double>(items);
                dp[2 * k] = std::move(g.d_p1);
                dp[2 * k + 1] = std::move(g.d_p2);
            }
        }
    }
    require(std::isfinite(stats.loss), ErrorCode::NonfiniteLoss, "pretext loss is not finite");
    if (!grads) return stats;

    std::vector<PretextGrads<T>> item_grads(items, PretextGrads<T>(m));
    parallel_for(items, jobs, [&](std::size_t k) {
        auto& g = item_grads[k];
        for (std::size_t v = 2 * k; v < 2 * k + 2; ++v) {
            std::vector<T> d_z(z[v].size());
            if (objective == Objective::NtXent) {
                for (std::size_t c = 0; c < d_z.size(); ++c) d_z[c] = static_cast<T>(dz[v][c]);
            } else {
                const std::vector<T> d_p(dp[v].begin(), dp[v].end());
                d_z = m.predictor->backward(pred_cache[v], d_p, &g.predictor);
            }
            const auto d_e = m.projection.backward(proj_cache[v], d_z, &g.projection);
            if (keep) {
                m.encoder.backward(enc_cache[v], d_e, g.encoder);
                enc_cache[v] = EncCache{};  // release early
            } else {
                EncCache c;
                m.encoder.forward(views[v], &c);
                m.encoder.backward(c, d_e, g.encoder);
            }
        }
    });
    for (const auto& g : item_grads) grads->add(g);
    return stats;
}

/// Everything a pretraining run produces.
struct PretrainResult {
    Stream stream = Stream::Signal;
    PretrainConfig config;
    PretextModel<float> model;
    std::optional<wavelet::ScaleGrid> grid;  // scalogram learner only
    std::vector<double> loss_curve;          // one entry per optimizer step
    nlohmann::json history = nlohmann::json::array();
    std::size_t window_len = dataio::kWindowLen;

    nn::Checkpoint to_checkpoint() const;
};

inline nlohmann::json to_json(const PretrainConfig& c) {
    return {{"learner", to_string(c.learner)}, {"objective", to_string(c.objective)},
            {"batch_size", c.batch_size},      {"epochs", c.epochs},
            {"learning_rate", c.learning_rate}, {"l2", c.l2},
            {"tau", c.tau},                    {"seed", c.seed}};
}

inline nn::Checkpoint PretrainResult::to_checkpoint() const {
    nn::Checkpoint c;
    const std::string s = to_string(stream);
    c.components.push_back({s + ".encoder", encoder_arch(stream), nn::component_config(model.encoder),
                            model.encoder.params()});
    c.components.push_back(
        {s + ".projection", "projection_head", nn::component_config(model.projection), model.projection.params()});
    if (model.predictor)
        c.components.push_back(
            {s + ".predictor", "predictor_head", nn::component_config(*model.predictor), model.predictor->params()});
    c.seed = config.seed;
    c.hyperparameters = to_json(config);
    c.history = history;
    c.loss_curve = loss_curve;
    c.extra = {{"stream", s}, {"window_len", window_len}};
    if (grid) c.extra["scale_grid"] = to_json(*grid);
    return c;
}

namespace detail {

inline constexpr std::uint64_t kPretrainStream = 0x5e1f;

template <class Sample, class Spec>
void pretrain_loop(PretrainResult& r, const std::vector<Sample>& samples, const std::vector<std::string>& subjects,
                   const augment::AugmentPipeline<Spec>& pipeline, ProvenanceAudit* audit, std::ostream* metrics) {
    const PretrainConfig& cfg = r.config;
    const std::size_t B = cfg.batch_size;
    require(samples.size() >= B, ErrorCode::InsufficientData,
            "pretraining needs at least batch_size=" + std::to_string(B) + " windows, got " +
                std::to_string(samples.size()));
    require(!pipeline.steps.empty(), ErrorCode::EmptyPipeline, "augmentation pipeline is empty");
    const nn::AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-7, cfg.l2};
    auto& m = r.model;
    nn::AdamState<float> s_enc(m.encoder.params()), s_proj(m.projection.params()), s_pred;
    if (m.predictor) s_pred = nn::AdamState<float>(m.predictor->params());

    const RngStream root(cfg.seed, kPretrainStream);
    const std::size_t batches = samples.size() / B;  // last partial batch dropped
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        RngStream shuffle = root.split(2 * epoch);
        const RngStream views_rng = root.split(2 * epoch + 1);
        const auto order = shuffle.permutation(samples.size());
        double loss_sum = 0.0, std_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<std::vector<float>> views(2 * B);
            for (std::size_t i = 0; i < B; ++i) {
                const std::size_t idx = order[b * B + i];
                if (audit) audit->check(subjects[idx]);
            }
            parallel_for(B, cfg.jobs, [&](std::size_t i) {
                const std::size_t pos = b * B + i;
                auto [v1, v2] = augment::make_views(samples[order[pos]], pipeline, views_rng.split(pos));
                views[2 * i] = encoder_input<float>(v1);
                views[2 * i + 1] = encoder_input<float>(v2);
            });
            PretextGrads<float> g(m);
            PretextStats st;
            try {
                st = pretext_loss(m, views, cfg.objective, cfg.tau, &g, cfg.jobs, cfg.cache_budget_mb);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonfiniteLoss && e.code() != ErrorCode::ZeroVector) throw;
                fail(ErrorCode::NonfiniteLoss, to_string(r.stream) + " pretraining diverged at epoch " +
                                                   std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1) +
                                                   ": " + e.what());
            }
            nn::adam_step(m.encoder.params(), g.encoder, s_enc, adam);
            nn::adam_step(m.projection.params(), g.projection, s_proj, adam);
            if (m.predictor) nn::adam_step(m.predictor->params(), g.predictor, s_pred, adam);
            r.loss_curve.push_back(st.loss);
            loss_sum += st.loss;
            std_sum += st.embedding_std;
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double spread = std_sum / static_cast<double>(batches);
        const nlohmann::json rec = {{"epoch", epoch + 1},
                                    {"mean_loss", loss_sum / static_cast<double>(batches)},
                                    {"embedding_std", spread},
                                    {"collapsed", spread < kCollapseThreshold}};
        r.history.push_back(rec);
        if (metrics) {
            auto line = rec;
            line["stream"] = to_string(r.stream);
            line["wall_time_s"] = wall;
            *metrics << line.dump() << '\n' << std::flush;
        }
    }
}

}  // namespace detail

/// Self-supervised pretraining of one learner on unlabeled windows. The
/// scalogram learner converts every window once, up front, with the
/// configured scale grid. `metrics` receives one JSON line per epoch.
inline PretrainResult pretrain(const PretrainConfig& cfg, const std::vector<dataio::SignalWindow>& windows,
                               double sample_rate_hz = 50.0, ProvenanceAudit* audit = nullptr,
                               std::ostream* metrics = nullptr) {
    cfg.validate();
    require(!windows.empty(), ErrorCode::InsufficientData, "no windows to pretrain on");
    PretrainResult r{cfg.learner, cfg, PretextModel<float>::create(nn::encoder_config(encoder_arch(cfg.learner)),
                                                                    cfg.objective, cfg.seed),
                     std::nullopt, {}, nlohmann::json::array(), windows.front().length()};
    std::vector<std::string> subjects;
    for (const auto& w : windows) subjects.push_back(w.subject);
    if (cfg.learner == Stream::Signal) {
        detail::pretrain_loop(r, windows, subjects, cfg.temporal, audit, metrics);
    } else {
        r.grid = cfg.scale_grid.grid(sample_rate_hz);
        const wavelet::CwtPlan plan(*r.grid, windows.front().length());
        const auto images = wavelet::scalograms(windows, plan, cfg.jobs);
        detail::pretrain_loop(r, images, subjects, cfg.timefreq, audit, metrics);
    }
    return r;
}

}  // namespace tfcl::contrastive

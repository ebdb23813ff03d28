// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfcl/augment/views.hpp"
#include "tfcl/contrastive/losses.hpp"
#include "tfcl/contrastive/pretrain.hpp"
#include "tfcl/dataio/split.hpp"
#include "tfcl/dataio/synth.hpp"
#include "tfcl/eval/experiment.hpp"
#include "tfcl/eval/metrics.hpp"
#include "tfcl/nn/arch.hpp"
#include "tfcl/nn/checkpoint.hpp"
#include "tfcl/nn/gradcheck.hpp"
#include "tfcl/wavelet/cwt.hpp"
#include "tfcl/wavelet/scalogram.hpp"

using namespace tfcl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t d, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> z(n, std::vector<double>(d));
    for (auto& r : z)
        for (auto& v : r) v = nd(gen);
    return z;
}

// ---- 1: NT-Xent against a brute-force long-double evaluation ----

long double brute_force_ntxent(const std::vector<std::vector<double>>& z, double tau) {
    auto sim = [&](std::size_t a, std::size_t b) {
        long double d = 0, na = 0, nb = 0;
        for (std::size_t c = 0; c < z[a].size(); ++c) {
            d += static_cast<long double>(z[a][c]) * z[b][c];
            na += static_cast<long double>(z[a][c]) * z[a][c];
            nb += static_cast<long double>(z[b][c]) * z[b][c];
        }
        return d / std::sqrt(na * nb);
    };
    long double total = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        long double den = 0;
        for (std::size_t k = 0; k < z.size(); ++k)
            if (k != i) den += std::exp(sim(i, k) / tau);
        total += -std::log(std::exp(sim(i, i ^ 1) / tau) / den);
    }
    return total / static_cast<long double>(z.size());
}

Outcome ntxent_oracle() {
    Outcome o;
    std::mt19937_64 gen(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 * (1 + gen() % 4), d = 1 + gen() % 4;
        const double tau = std::array{0.1, 0.5, 1.0}[gen() % 3];
        const auto z = random_rows(n, d, gen);
        const double got = contrastive::ntxent_batch_loss(contrastive::LatentBatch<double>{z, tau});
        const auto want = static_cast<double>(brute_force_ntxent(z, tau));
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
    }
    o.check(worst <= 1e-6, "500 batches within 1e-6 relative");
    contrastive::LatentBatch<double> hand{{{1, 0}, {1, 0}, {0, 1}, {0, 1}}, 1.0};
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
    const double err = std::abs(contrastive::ntxent_pair_loss(0, 1, hand) - expected);
    o.check(err <= 1e-9, "hand case -log(e/(e+2)) to 1e-9");
    o.note("500 batches, max rel err " + fmt("%.2e", worst) + ", hand err " + fmt("%.1e", err));
    return o;
}

// ---- 2: finite-difference checks of the full pretext loss ----

Outcome gradient_checks() {
    Outcome o;
    const nn::EncoderConfig enc{"signal_encoder", 3, 1, 12, {{1, 3, 4}, {1, 3, 96}}};
    std::mt19937_64 gen(4);
    const auto views = random_rows(6, 36, gen);
    for (auto objective : {contrastive::Objective::NtXent, contrastive::Objective::StopGrad}) {
        auto model = contrastive::PretextModel<double>::create(enc, objective, 3);
        std::vector<std::vector<double>> targets;
        for (const auto& v : views) targets.push_back(model.projection.forward(model.encoder.forward(v)));
        nn::FlatLossFn loss = [&](const std::vector<double>& flat, std::vector<double>* grad) {
            auto m = model;
            m.assign(flat);
            contrastive::PretextGrads<double> g(m);
            const auto st = contrastive::pretext_loss(m, views, objective, 0.5, grad ? &g : nullptr, 1, 1024, &targets);
            if (grad) *grad = g.flatten();
            return st.loss;
        };
        const double err = nn::grad_check(loss, model.flatten(), 1e-6, 600, 9).max_rel_error;
        o.check(err <= 1e-4, contrastive::to_string(objective) + " finite differences within 1e-4");
        o.note(contrastive::to_string(objective) + " max rel err " + fmt("%.2e", err));

        if (objective == contrastive::Objective::StopGrad) {
            // the target branch must contribute nothing: gradients with the
            // targets recomputed inside the loss equal those with them frozen
            contrastive::PretextGrads<double> live(model), frozen(model);
            contrastive::pretext_loss(model, views, objective, 0.5, &live, 1, 1024);
            contrastive::pretext_loss(model, views, objective, 0.5, &frozen, 1, 1024, &targets);
            const auto a = live.flatten(), b = frozen.flatten();
            double diff = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
            double target_grad = 0.0;
            for (int t = 0; t < 100; ++t) {
                const auto r = random_rows(4, 8, gen);
                contrastive::StopgradGrads<double> g;
                contrastive::stopgrad_loss<double>(r[0], r[1], r[2], r[3], &g);
                for (double v : g.d_z1_target) target_grad = std::max(target_grad, std::abs(v));
                for (double v : g.d_z2_target) target_grad = std::max(target_grad, std::abs(v));
            }
            o.check(diff <= 1e-10 && target_grad <= 1e-10, "stop-gradient branch gradient 0 within 1e-10");
            o.note("stop-gradient branch " + fmt("%.1e", std::max(diff, target_grad)));
        }
    }
    return o;
}

// ---- 3: CWT linearity, ridge localisation, zero signal ----

Outcome cwt_correctness() {
    Outcome o;
    const double dt = 0.02;
    const auto grid = wavelet::scale_grid(128, 0.5, 20.0, dt);
    const wavelet::CwtPlan plan(grid, 128);
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(128), y(128), mix(128);
        const double alpha = nd(gen), beta = nd(gen);
        for (std::size_t i = 0; i < 128; ++i) {
            x[i] = nd(gen);
            y[i] = nd(gen);
            mix[i] = alpha * x[i] + beta * y[i];
        }
        const auto cx = plan.transform(x), cy = plan.transform(y), cm = plan.transform(mix);
        double peak = 0.0;
        for (double v : cm.values()) peak = std::max(peak, std::abs(v));
        for (std::size_t i = 0; i < cm.size(); ++i) {
            const double want = alpha * cx[i] + beta * cy[i];
            worst = std::max(worst, std::abs(cm[i] - want) / std::max(std::abs(want), 1e-3 * peak));
        }
    }
    o.check(worst <= 1e-9, "linearity to 1e-9 relative");

    int within = 0;
    const double freqs[] = {2.0, 3.0, 5.0, 8.0, 12.0, 16.0};
    for (double f : freqs) {
        std::vector<double> x(128);
        for (std::size_t i = 0; i < 128; ++i) x[i] = std::cos(2.0 * std::numbers::pi * f * i * dt);
        const auto c = plan.transform(x);
        std::size_t ridge = 0;
        double best = -1.0;
        for (std::size_t s = 0; s < grid.size(); ++s) {
            double e = 0.0;
            for (std::size_t b = 0; b < 128; ++b) e += std::abs(c(s, b));
            if (e > best) best = e, ridge = s;
        }
        const double target = wavelet::scale_for_frequency(f);
        std::size_t nearest = 0;
        for (std::size_t s = 1; s < grid.size(); ++s)
            if (std::abs(std::log(grid.scales[s] / target)) < std::abs(std::log(grid.scales[nearest] / target)))
                nearest = s;
        if (std::abs(static_cast<long>(ridge) - static_cast<long>(nearest)) <= 1) ++within;
    }
    o.check(within == 6, "ridge within +-1 grid step for 6 frequencies");

    dataio::SignalWindow zero;
    zero.values = Tensor<double>({128, 3});
    const auto s = wavelet::scalogram(zero, plan);
    const bool all_zero = std::all_of(s.planes.values().begin(), s.planes.values().end(), [](float v) { return v == 0.0f; });
    o.check(all_zero, "zero signal gives zero scalogram");
    o.note("linearity " + fmt("%.1e", worst) + ", ridges " + std::to_string(within) + "/6");
    return o;
}

// ---- 4: encoder geometry and nested-loop oracles ----

std::vector<double> encoder_oracle(const nn::EncoderConfig& cfg, const nn::ParamSet<double>& p, std::vector<double> x) {
    std::size_t c = cfg.in_channels, h = cfg.in_h, w = cfg.in_w;
    for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
        const auto& L = cfg.layers[l];
        const auto& W = p[2 * l].value;
        const auto& B = p[2 * l + 1].value;
        const std::size_t oh = h - L.kernel_h + 1, ow = w - L.kernel_w + 1;
        std::vector<double> y(L.filters * oh * ow);
        for (std::size_t o = 0; o < L.filters; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double s = B[o];
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t ky = 0; ky < L.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < L.kernel_w; ++kx)
                                s += W[((o * c + ci) * L.kernel_h + ky) * L.kernel_w + kx] *
                                     x[(ci * h + i + ky) * w + j + kx];
                    y[(o * oh + i) * ow + j] = std::max(s, 0.0);
                }
        x = std::move(y);
        c = L.filters;
        h = oh;
        w = ow;
    }
    std::vector<double> e(c, 0.0);
    for (std::size_t o = 0; o < c; ++o)
        for (std::size_t k = 0; k < h * w; ++k) e[o] = std::max(e[o], x[o * h * w + k]);
    return e;
}

Outcome encoder_conformance() {
    Outcome o;
    nn::ConvEncoder<double> sca(nn::scalogram_encoder_config(), 5);
    bool sizes = sca.geoms().size() == 3;
    const std::size_t expected[] = {121, 118, 115};
    for (std::size_t l = 0; sizes && l < 3; ++l)
        sizes = sca.geoms()[l].out_h() == expected[l] && sca.geoms()[l].out_w() == expected[l];
    o.check(sizes, "scalogram spatial sizes 121/118/115");

    double worst = 0.0;
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
    for (const auto& cfg : {nn::signal_encoder_config(), nn::scalogram_encoder_config()}) {
        const int trials = cfg.arch == "signal_encoder" ? 3 : 1;
        for (int t = 0; t < trials; ++t) {
            nn::ConvEncoder<double> enc(cfg, 100 + t);
            std::vector<double> flat(enc.params().flat_size());
            for (auto& v : flat) v = 0.15 * u(gen);
            enc.params().assign(flat);
            std::vector<double> x(cfg.input_size());
            for (auto& v : x) v = cfg.arch == "signal_encoder" ? u(gen) : u01(gen);
            const auto got = enc.forward(x);
            const auto want = encoder_oracle(cfg, enc.params(), x);
            for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        }
    }
    o.check(worst <= 1e-9, "both encoders match nested-loop oracle to 1e-9");
    o.note("max abs err " + fmt("%.1e", worst));
    return o;
}

// ---- 5: metric oracles ----

Outcome metric_oracles() {
    Outcome o;
    std::ifstream in(std::string(TFCL_ORACLE_DIR) + "/metrics_cases.json");
    const auto cases = json::parse(in)["cases"];
    double worst = 0.0;
    std::size_t n = 0;
    for (const auto& c : cases) {
        const auto m = eval::confusion_from_json(c["matrix"]);
        worst = std::max(worst, std::abs(eval::weighted_f1(m) - c["weighted_f1"].get<double>()));
        if (!c["kappa"].is_null()) worst = std::max(worst, std::abs(eval::cohen_kappa(m) - c["kappa"].get<double>()));
        ++n;
    }
    o.check(n >= 1000 && worst <= 1e-12, "1000 matrices within 1e-12");
    const auto hand = eval::confusion_from_json(json::parse("[[40,10],[10,40]]"));
    o.check(eval::cohen_kappa(hand) == 0.6 && eval::weighted_f1(hand) == 0.8, "hand case kappa 0.6, F1 0.8 exact");
    o.note(std::to_string(n) + " matrices, max err " + fmt("%.1e", worst));
    return o;
}

// ---- 6: augmentation properties ----

Outcome augmentation_properties() {
    Outcome o;
    using namespace augment;
    auto signal = [](std::uint64_t seed) {
        RngStream rng(seed, 3);
        Tensor<double> v({128, 3});
        for (auto& x : v.values()) x = rng.normal(0.0, 2.0);
        return v;
    };
    auto spec = [](TemporalKind k) {
        TemporalSpec s;
        s.kind = k;
        return s;
    };
    bool involutions = true, conserve = true, scale_const = true;
    double norm_err = 0.0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto v = signal(seed);
        RngStream rng(seed, 11);
        involutions &= negate(negate(v)) == v && time_flip(time_flip(v)) == v;
        const std::multiset<double> before(v.values().begin(), v.values().end());
        auto perm = spec(TemporalKind::Permutation);
        perm.permutation_segments = 1 + seed % 9;
        const auto p = apply_temporal(v, perm, rng);
        const auto sh = apply_temporal(v, spec(TemporalKind::ChannelShuffle), rng);
        conserve &= std::multiset<double>(p.values().begin(), p.values().end()) == before;
        conserve &= std::multiset<double>(sh.values().begin(), sh.values().end()) == before;
        const auto r = apply_temporal(v, spec(TemporalKind::Rotation), rng);
        for (std::size_t t = 0; t < 128; ++t) {
            const double a = std::hypot(v(t, 0), v(t, 1), v(t, 2)), b = std::hypot(r(t, 0), r(t, 1), r(t, 2));
            norm_err = std::max(norm_err, std::abs(a - b) / std::max(1.0, a));
        }
        const auto sc = apply_temporal(v, spec(TemporalKind::Scale), rng);
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] != 0.0) lo = std::min(lo, sc[i] / v[i]), hi = std::max(hi, sc[i] / v[i]);
        scale_const &= hi - lo < 1e-9;
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RngStream rng(seed, 4);
        auto s = wavelet::blank_scalogram(128, 128);
        for (auto& v : s.planes.values()) v = static_cast<float>(rng.uniform());
        involutions &= flip_horizontal(flip_horizontal(s)) == s;
    }
    o.check(involutions, "involutions bit-exact");
    o.check(conserve, "permutation / channel-shuffle multiset conservation");
    o.check(norm_err <= 1e-9, "rotation norm preservation 1e-9");
    o.check(scale_const, "scale factor constant per window");

    std::size_t fuzzed = 0, outside = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        RngStream rng(seed, 31);
        auto s = wavelet::blank_scalogram(128, 128);
        const int style = static_cast<int>(rng.index(3));
        for (auto& v : s.planes.values())
            v = style == 0 ? static_cast<float>(rng.uniform()) : style == 1 ? (rng.bernoulli(0.5) ? 1.0f : 0.0f) : 0.5f;
        TimeFreqSpec ts;
        ts.kind = kAllTimeFreqKinds[rng.index(kAllTimeFreqKinds.size())];
        const double b = rng.uniform(0, 2), c = rng.uniform(0, 3), h = rng.uniform(0, 1);
        ts.brightness = {-b, b};
        ts.contrast = {rng.uniform(0, 1), 1 + c};
        ts.saturation = {rng.uniform(0, 1), 1 + c};
        ts.hue = {-h, h};
        ts.grayscale_prob = rng.uniform();
        const double a = rng.uniform(0.01, 1.0);
        ts.crop_area = {a, rng.uniform(a, 1.0)};
        RngStream apply_rng = rng.split(1);
        const auto out = apply_timefreq(s, ts, apply_rng);
        ++fuzzed;
        if (out.planes.shape() != s.planes.shape() ||
            !std::all_of(out.planes.values().begin(), out.planes.values().end(),
                         [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; }))
            ++outside;
    }
    o.check(fuzzed == 10000 && outside == 0, "time-frequency outputs in [0,1] over 10^4 fuzz cases");
    o.note("rotation norm err " + fmt("%.1e", norm_err) + ", " + std::to_string(fuzzed) + " fuzz cases, " +
           std::to_string(outside) + " out of range");
    return o;
}

// ---- 7/8/9/10 share the synthetic corpora ----

dataio::WindowSet synth(std::size_t subjects, std::size_t per_class, std::uint64_t seed, std::array<double, 3> hz) {
    const std::vector<dataio::ClassSpec> classes{{"slow", {hz[0], hz[0], hz[0]}, 1.0, 0.0},
                                                 {"mid", {hz[1], hz[1], hz[1]}, 1.0, 0.0},
                                                 {"fast", {hz[2], hz[2], hz[2]}, 1.0, 0.0}};
    return dataio::window(dataio::synth_dataset(subjects, classes, per_class, 0.1, seed));
}

unsigned worker_count() { return std::clamp(std::thread::hardware_concurrency(), 1u, 4u); }

eval::ExperimentConfig desk_config(unsigned jobs) {
    eval::ExperimentConfig c;
    c.seed = 3;
    c.fusion = eval::FusionMode::Score;
    c.jobs = jobs;
    for (auto* p : {&c.signal_pretrain, &c.scalogram_pretrain}) p->batch_size = 32;
    c.signal_pretrain.epochs = 20;
    c.scalogram_pretrain.epochs = 10;
    for (auto* f : {&c.signal_finetune, &c.scalogram_finetune}) {
        f->batch_size = 32;
        f->patience = 10;
    }
    c.signal_finetune.epochs = 30;
    c.scalogram_finetune.epochs = 15;
    return c;
}

struct EndToEnd {
    std::optional<eval::MetricsReport> report;
    double seconds = 0.0;
    std::string error;
};

EndToEnd& desk_run() {
    static EndToEnd run = [] {
        EndToEnd r;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto ws = synth(8, 3, 1, {2.0, 4.0, 6.0});
            const auto cfg = desk_config(worker_count());
            const auto plan = dataio::make_splits(ws.windows, dataio::Scheme::Scheme2, cfg.seed);
            r.report = eval::run_scheme(ws, plan, cfg, json{{"run", "desk"}});
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return run;
}

Outcome split_integrity() {
    Outcome o;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::set<std::string> subjects;
        for (std::size_t i = 0; i < 5 + seed % 21; ++i) subjects.insert("p" + std::to_string(i));
        for (auto scheme : {dataio::Scheme::Scheme1, dataio::Scheme::Scheme2}) {
            const auto plan = dataio::make_splits(subjects, scheme, seed);
            std::multiset<std::string> tests;
            for (const auto& f : plan.folds) {
                std::set<std::string> all;
                std::size_t count = 0;
                for (const auto* part : {&f.train, &f.val, &f.test}) {
                    all.insert(part->begin(), part->end());
                    count += part->size();
                }
                ok &= count == all.size() && all == subjects;
                tests.insert(f.test.begin(), f.test.end());
            }
            if (scheme == dataio::Scheme::Scheme1)
                ok &= plan.folds.size() == 5 && tests == std::multiset<std::string>(subjects.begin(), subjects.end());
            else
                ok &= plan.folds.size() == 1;
        }
    }
    o.check(ok, "100 seeded plans: disjoint folds, scheme1 coverage");
    const auto& run = desk_run();
    if (!run.report) {
        o.check(false, "end-to-end run raised: " + run.error);
        return o;
    }
    std::size_t audits = 0;
    for (const auto& f : run.report->folds) audits += f.audit_checks;
    o.check(audits > 0, "provenance audit ran during the end-to-end run");
    o.note("200 plans checked, " + std::to_string(audits) + " audited training batches in the criterion 8 run, no violation");
    return o;
}

Outcome desk_scale_run() {
    Outcome o;
    const auto& run = desk_run();
    if (!run.report) {
        o.check(false, "end-to-end run raised: " + run.error);
        return o;
    }
    const auto& r = *run.report;
    const double fused = r.aggregate("score_fusion", "weighted_f1").mean;
    const double sig = r.aggregate("signal", "weighted_f1").mean;
    const double sca = r.aggregate("scalogram", "weighted_f1").mean;
    o.check(fused >= 0.90, "fused weighted F1 >= 0.90");
    o.check(fused >= std::max(sig, sca) - 0.05, "fused >= max(single) - 0.05");
    o.check(run.seconds <= 900.0, "runtime <= 15 min");
    o.note("fused F1 " + fmt("%.4f", fused) + ", signal " + fmt("%.4f", sig) + ", scalogram " + fmt("%.4f", sca) +
           ", " + fmt("%.0f", run.seconds) + " s on " + std::to_string(worker_count()) + " worker(s)");
    return o;
}

Outcome transfer_protocol() {
    Outcome o;
    const auto source = synth(6, 2, 11, {2.0, 4.0, 6.0});
    const auto target = synth(8, 3, 12, {3.0, 5.0, 7.0});
    auto cfg = desk_config(worker_count());
    for (auto* f : {&cfg.signal_finetune, &cfg.scalogram_finetune}) f->unfreeze_last_conv = false;  // heads only
    const auto plan = dataio::make_splits(target.windows, dataio::Scheme::Scheme2, cfg.seed);
    const auto r = eval::transfer_protocol(source, target, plan, cfg, json{{"run", "transfer"}});
    const double chance = 1.0 / static_cast<double>(target.labels.size());
    const double acc = r.aggregate(r.primary, "accuracy").mean;
    o.check(acc > 2.0 * chance, "accuracy > 2x chance");
    o.note(r.primary + " accuracy " + fmt("%.4f", acc) + " vs bar " + fmt("%.4f", 2.0 * chance) + " (signal " +
           fmt("%.4f", r.aggregate("signal", "accuracy").mean) + ", scalogram " +
           fmt("%.4f", r.aggregate("scalogram", "accuracy").mean) + ")");
    return o;
}

Outcome determinism_and_persistence() {
    Outcome o;
    const auto ws = synth(5, 2, 4, {2.0, 4.0, 6.0});
    eval::ExperimentConfig cfg;
    cfg.seed = 21;
    cfg.jobs = 1;
    for (auto* p : {&cfg.signal_pretrain, &cfg.scalogram_pretrain}) p->batch_size = 8, p->epochs = 2;
    cfg.scalogram_pretrain.epochs = 1;
    for (auto* f : {&cfg.signal_finetune, &cfg.scalogram_finetune}) f->batch_size = 16, f->epochs = 3;
    cfg.scalogram_finetune.epochs = 1;
    const auto plan = dataio::make_splits(ws.windows, dataio::Scheme::Scheme1, cfg.seed);
    const json snap{{"run", "determinism"}};
    const auto dir = fs::temp_directory_path() / "tfcl_acceptance";
    fs::remove_all(dir);
    const fs::path run_a = dir / "a", run_b = dir / "b";
    const auto a = eval::to_json(eval::run_scheme(ws, plan, cfg, snap, nullptr, &run_a)).dump(2);
    const auto b = eval::to_json(eval::run_scheme(ws, plan, cfg, snap, nullptr, &run_b)).dump(2);
    o.check(a == b, "identical config + seed gives byte-identical reports");

    const fs::path ck = run_a / "fold_0" / "finetuned";
    const auto c = nn::load_checkpoint(ck);
    nn::save_checkpoint(c, dir / "copy");
    const auto back = nn::load_checkpoint(dir / "copy");
    bool same = back.components.size() == c.components.size() && back.label_map == c.label_map;
    for (std::size_t i = 0; same && i < c.components.size(); ++i)
        same = back.components[i].params == c.components[i].params;
    o.check(same, "checkpoint save -> load round-trips bit-exact");

    auto rejected = [&](const std::function<void(const fs::path&)>& corrupt, ErrorCode want) {
        const auto d = dir / "corrupt";
        fs::remove_all(d);
        nn::save_checkpoint(c, d);
        corrupt(d);
        try {
            nn::load_checkpoint(d);
        } catch (const Error& e) {
            return e.code() == want;
        }
        return false;
    };
    const bool flip = rejected(
        [](const fs::path& d) {
            std::fstream f(d / nn::kWeightsFile, std::ios::in | std::ios::out | std::ios::binary);
            f.seekg(64);
            const char byte = static_cast<char>(f.get());
            f.seekp(64);
            f.put(static_cast<char>(byte ^ 0x10));
        },
        ErrorCode::ChecksumMismatch);
    const bool truncate = rejected(
        [](const fs::path& d) { fs::resize_file(d / nn::kWeightsFile, fs::file_size(d / nn::kWeightsFile) - 8); },
        ErrorCode::SizeMismatch);
    const bool garbage = rejected([](const fs::path& d) { std::ofstream(d / nn::kManifestFile) << "{\"schema"; },
                                  ErrorCode::CorruptManifest);
    o.check(flip && truncate && garbage, "corrupted blobs rejected before use");
    o.note("report " + std::to_string(a.size()) + " bytes identical, round-trip exact, 3 corruptions rejected");
    fs::remove_all(dir);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;  // 0: no runtime bound
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "NT-Xent oracle", 5.0, ntxent_oracle},
        {2, "gradient checks", 60.0, gradient_checks},
        {3, "CWT correctness", 10.0, cwt_correctness},
        {4, "encoder shape conformance", 0.0, encoder_conformance},
        {5, "metric oracles", 0.0, metric_oracles},
        {6, "augmentation properties", 0.0, augmentation_properties},
        {7, "split integrity", 0.0, split_integrity},
        {8, "end-to-end desk-scale run", 0.0, desk_scale_run},
        {9, "transfer protocol", 0.0, transfer_protocol},
        {10, "determinism and persistence", 0.0, determinism_and_persistence},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0) o.check(s < c.budget_s, "runtime under " + fmt("%.0f", c.budget_s) + " s");
        if (!o.pass) ++failures;
        std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "tfcl/dataio/synth.hpp"
#include "tfcl/downstream/finetune.hpp"
#include "tfcl/downstream/fusion.hpp"

using namespace tfcl;
using namespace tfcl::downstream;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

const std::vector<std::string> kLabels{"fast", "mid", "slow"};

std::vector<dataio::SignalWindow> synth_windows(std::size_t subjects, std::size_t per_class, std::uint64_t seed) {
    const std::vector<dataio::ClassSpec> classes{
        {"slow", {2.0, 2.0, 2.0}, 1.0, 0.0}, {"mid", {4.0, 4.0, 4.0}, 1.0, 0.0}, {"fast", {6.0, 6.0, 6.0}, 1.0, 0.0}};
    return dataio::window(dataio::synth_dataset(subjects, classes, per_class, 0.1, seed)).windows;
}

std::vector<dataio::SignalWindow> only_subjects(const std::vector<dataio::SignalWindow>& ws,
                                                const std::set<std::string>& keep) {
    std::vector<dataio::SignalWindow> out;
    for (const auto& w : ws)
        if (keep.count(w.subject)) out.push_back(w);
    return out;
}

bool layer_equal(const nn::ConvEncoder<float>& a, const nn::ConvEncoder<float>& b, std::size_t l) {
    auto [wi, bi] = a.layer_params(l);
    return a.params()[wi].value == b.params()[wi].value && a.params()[bi].value == b.params()[bi].value;
}

FinetuneConfig quick(std::size_t epochs) {
    FinetuneConfig c;
    c.epochs = epochs;
    c.batch_size = 16;
    c.seed = 5;
    return c;
}

double accuracy(const std::vector<std::vector<double>>& p, const std::vector<dataio::SignalWindow>& ws) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < ws.size(); ++i)
        ok += static_cast<int>(argmax_lowest(p[i])) == *ws[i].label;
    return static_cast<double>(ok) / static_cast<double>(ws.size());
}

}  // namespace

TEST(CrossEntropy, HandValues) {
    const std::vector<double> p{0.7, 0.2, 0.1};
    EXPECT_NEAR(cross_entropy(p, 0), -std::log(0.7), 1e-15);
    EXPECT_NEAR(cross_entropy(p, 2), std::log(10.0), 1e-14);
    EXPECT_EQ(code_of([&] { cross_entropy(p, 3); }), ErrorCode::BadLabel);
    EXPECT_EQ(code_of([&] { cross_entropy(p, -1); }), ErrorCode::BadLabel);
}

TEST(FuseScores, WeightedAverage) {
    const std::vector<double> a{0.6, 0.3, 0.1}, b{0.2, 0.2, 0.6};
    const auto f = fuse_scores(a, b);
    EXPECT_DOUBLE_EQ(f[0], 0.4);
    EXPECT_DOUBLE_EQ(f[1], 0.25);
    EXPECT_DOUBLE_EQ(f[2], 0.35);
    const auto g = fuse_scores(a, b, 1.0);
    EXPECT_EQ(g, a);
    double s = 0;
    for (double v : f) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(FuseScores, TieGoesToLowestIndex) {
    const std::vector<double> a{0.5, 0.5, 0.0}, b{0.3, 0.3, 0.4};
    EXPECT_EQ(fused_class(a, b), 0u);  // fused: 0.4 0.4 0.2
    const std::vector<double> c{0.0, 0.5, 0.5}, d{0.0, 0.5, 0.5};
    EXPECT_EQ(fused_class(c, d), 1u);
}

TEST(FuseScores, LengthMismatch) {
    const std::vector<double> a{0.5, 0.5}, b{0.2, 0.3, 0.5};
    EXPECT_EQ(code_of([&] { fuse_scores(a, b); }), ErrorCode::LengthMismatch);
}

TEST(FuseFeatures, Concatenates) {
    const std::vector<float> a{1, 2}, b{3};
    EXPECT_EQ(fuse_features(a, b), (std::vector<float>{1, 2, 3}));
}

TEST(Finetune, FreezeContractLastConvUnfrozen) {
    const auto ws = synth_windows(3, 2, 1);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 7);
    const auto r = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, {}, quick(3));
    EXPECT_EQ(r.first_trainable_layer, 2u);
    EXPECT_TRUE(layer_equal(r.model.encoder, pre, 0));
    EXPECT_TRUE(layer_equal(r.model.encoder, pre, 1));
    EXPECT_FALSE(layer_equal(r.model.encoder, pre, 2));
}

TEST(Finetune, FreezeContractFullyFrozen) {
    const auto ws = synth_windows(3, 2, 1);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 7);
    auto cfg = quick(3);
    cfg.unfreeze_last_conv = false;
    const auto r = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, {}, cfg);
    EXPECT_EQ(r.first_trainable_layer, 3u);
    for (std::size_t l = 0; l < 3; ++l) EXPECT_TRUE(layer_equal(r.model.encoder, pre, l));
}

TEST(Finetune, FromScratchTrainsEveryLayer) {
    const auto ws = synth_windows(3, 2, 1);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 7);
    auto cfg = quick(2);
    cfg.from_scratch = true;
    const auto r = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, {}, cfg);
    EXPECT_EQ(r.first_trainable_layer, 0u);
    const nn::ConvEncoder<float> fresh(nn::signal_encoder_config(), RngStream(cfg.seed, 0x4ead).split(1).engine()());
    for (std::size_t l = 0; l < 3; ++l) {
        EXPECT_FALSE(layer_equal(r.model.encoder, pre, l));
        EXPECT_FALSE(layer_equal(r.model.encoder, fresh, l));
    }
}

TEST(Finetune, SignalClassifierLearnsSyntheticClasses) {
    const auto ws = synth_windows(5, 3, 2);
    const auto train = only_subjects(ws, {"s00", "s01", "s02"});
    const auto val = only_subjects(ws, {"s03"});
    const auto test = only_subjects(ws, {"s04"});
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 3);
    const auto r = finetune(Stream::Signal, pre, std::nullopt, kLabels, train, val, quick(30));
    EXPECT_GE(accuracy(predict_all(r.model, test), test), 0.9);
    ASSERT_FALSE(r.report.history.empty());
    EXPECT_LT(r.report.history.back()["train_loss"].get<double>(),
              r.report.history.front()["train_loss"].get<double>());
}

TEST(Finetune, EarlyStoppingRestoresBestValidationWeights) {
    const auto ws = synth_windows(4, 2, 3);
    const auto train = only_subjects(ws, {"s00", "s01"});
    const auto val = only_subjects(ws, {"s03"});
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 4);
    auto cfg = quick(200);
    cfg.patience = 2;
    cfg.learning_rate = 1e-2;  // noisy enough that validation loss stalls quickly
    const auto r = finetune(Stream::Signal, pre, std::nullopt, kLabels, train, val, cfg);
    ASSERT_TRUE(r.report.stopped_early);
    EXPECT_LT(r.report.history.size(), 200u);
    EXPECT_EQ(r.report.history.size(), r.report.best_epoch + cfg.patience);
    // the restored weights reproduce the best recorded validation loss
    const auto p = predict_all(r.model, val);
    double l = 0;
    for (std::size_t i = 0; i < val.size(); ++i) l += cross_entropy(p[i], *val[i].label);
    EXPECT_NEAR(l / static_cast<double>(val.size()), r.report.best_val_loss, 1e-9);
}

TEST(Finetune, ResultIndependentOfJobs) {
    const auto ws = synth_windows(3, 2, 4);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 5);
    auto cfg = quick(2);
    const auto a = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, ws, cfg);
    cfg.jobs = 3;
    const auto b = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, ws, cfg);
    EXPECT_EQ(a.model.encoder.params()[4].value, b.model.encoder.params()[4].value);
    EXPECT_EQ(a.model.head.params()[0].value, b.model.head.params()[0].value);
}

TEST(Finetune, UncachedPrefixMatchesCachedPrefix) {
    const auto ws = synth_windows(2, 1, 5);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 6);
    auto cfg = quick(2);
    const auto cached = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, ws, cfg);
    cfg.cache_budget_mb = 0;
    const auto recomputed = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, ws, cfg);
    EXPECT_EQ(cached.model.encoder.params()[4].value, recomputed.model.encoder.params()[4].value);
    EXPECT_EQ(cached.model.head.params()[2].value, recomputed.model.head.params()[2].value);
}

TEST(Finetune, MissingLabelsAndNoData) {
    auto ws = synth_windows(2, 1, 6);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 1);
    EXPECT_EQ(code_of([&] { finetune(Stream::Signal, pre, std::nullopt, kLabels, {}, {}, quick(1)); }),
              ErrorCode::InsufficientData);
    ws[0].label.reset();
    EXPECT_EQ(code_of([&] { finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, {}, quick(1)); }),
              ErrorCode::LabelsMissing);
}

TEST(Finetune, AuditRejectsHeldOutSubject) {
    const auto ws = synth_windows(3, 1, 7);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 1);
    ProvenanceAudit audit{{"s02"}};
    EXPECT_EQ(code_of([&] { finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, {}, quick(1), &audit); }),
              ErrorCode::ProvenanceViolation);
}

TEST(Finetune, ClassifierCheckpointRoundTrip) {
    const auto ws = synth_windows(2, 1, 8);
    const nn::ConvEncoder<float> pre(nn::signal_encoder_config(), 2);
    const auto r = finetune(Stream::Signal, pre, std::nullopt, kLabels, ws, {}, quick(1));
    nn::Checkpoint c;
    append_to_checkpoint(c, r.model);
    const auto dir = std::filesystem::temp_directory_path() / "tfcl_downstream_ckpt";
    std::filesystem::remove_all(dir);
    nn::save_checkpoint(c, dir);
    const auto back = classifier_from_checkpoint(nn::load_checkpoint(dir), Stream::Signal);
    EXPECT_EQ(predict_all(back, ws), predict_all(r.model, ws));
    EXPECT_EQ(back.labels, kLabels);
    std::filesystem::remove_all(dir);
}

TEST(Finetune, ScalogramStreamAndFusionHead) {
    const auto ws = synth_windows(2, 1, 9);  // 6 windows
    const auto grid = contrastive::ScaleGridSpec{}.grid(dataio::kSynthRateHz);
    const nn::ConvEncoder<float> sig(nn::signal_encoder_config(), 1);
    const nn::ConvEncoder<float> sca(nn::scalogram_encoder_config(), 2);
    auto cfg = quick(1);
    cfg.batch_size = 3;
    const auto rs = finetune(Stream::Signal, sig, std::nullopt, kLabels, ws, {}, cfg);
    const auto rc = finetune(Stream::Scalogram, sca, grid, kLabels, ws, {}, cfg);
    EXPECT_TRUE(layer_equal(rc.model.encoder, sca, 0));
    EXPECT_FALSE(layer_equal(rc.model.encoder, sca, 2));
    // predict_scores on one window agrees with the batch path
    EXPECT_EQ(predict_scores(rc.model, ws[0]), predict_all(rc.model, {ws[0]})[0]);

    const auto fr = train_fusion(rs.model, rc.model, ws, {}, cfg);
    EXPECT_EQ(fr.model.head.input_dim(), 192u);
    for (std::size_t l = 0; l < 3; ++l) {
        EXPECT_TRUE(layer_equal(fr.model.signal_encoder, rs.model.encoder, l));
        EXPECT_TRUE(layer_equal(fr.model.scalogram_encoder, rc.model.encoder, l));
    }
    const auto p = predict_fusion(fr.model, ws);
    ASSERT_EQ(p.size(), ws.size());
    for (const auto& row : p) {
        double s = 0;
        for (double v : row) s += v;
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(CrossEntropy, UniformAndOneHot) {
    const std::vector<double> u(5, 0.2), one{0.0, 1.0};
    EXPECT_NEAR(cross_entropy(u, 3), std::log(5.0), 1e-15);
    EXPECT_EQ(cross_entropy(one, 1), 0.0);
    const std::vector<double> p{0.7, 0.3};
    EXPECT_NEAR(cross_entropy(p, 1), 1.2039728043259361, 1e-15);
}

// Random probability pairs: fusion is symmetric bit-exactly, and when both
// inputs agree on the argmax the fused argmax is the same class.
TEST(FuseScores, SymmetryAndAgreementProperty) {
    std::mt19937_64 gen(17);
    std::uniform_int_distribution<int> classes(2, 8);
    std::exponential_distribution<double> ex;
    auto draw = [&](std::size_t c) {
        std::vector<double> p(c);
        double s = 0;
        for (auto& v : p) s += (v = ex(gen));
        for (auto& v : p) v /= s;
        return p;
    };
    std::size_t agreeing = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t c = static_cast<std::size_t>(classes(gen));
        const auto p = draw(c), q = draw(c);
        ASSERT_EQ(fuse_scores(p, q), fuse_scores(q, p));
        if (argmax_lowest(p) == argmax_lowest(q)) {
            ++agreeing;
            ASSERT_EQ(fused_class(p, q), argmax_lowest(p));
        }
        ASSERT_EQ(fuse_scores(p, p), p);
    }
    EXPECT_GT(agreeing, 1000u);
}

TEST(FusionHead, ZeroWeightsGiveUniformAndOracleMatches) {
    nn::Mlp<float> head(nn::mlp_widths("fusion_head", 4), 3);
    std::vector<float> e(192);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::sin(0.37f * static_cast<float>(i));
    // dense oracle: relu(W1 e + b1) -> W2 h + b2 -> softmax, in double
    const auto& w1 = head.params()[0].value;
    const auto& b1 = head.params()[1].value;
    const auto& w2 = head.params()[2].value;
    const auto& b2 = head.params()[3].value;
    std::vector<double> h(64), logits(4);
    for (std::size_t o = 0; o < 64; ++o) {
        double s = b1[o];
        for (std::size_t i = 0; i < 192; ++i) s += static_cast<double>(w1[o * 192 + i]) * e[i];
        h[o] = std::max(0.0, s);
    }
    for (std::size_t o = 0; o < 4; ++o) {
        double s = b2[o];
        for (std::size_t i = 0; i < 64; ++i) s += static_cast<double>(w2[o * 64 + i]) * h[i];
        logits[o] = s;
    }
    const auto want = nn::softmax<double>(logits);
    const auto got = softmax_of(head.forward(e));
    for (std::size_t o = 0; o < 4; ++o) EXPECT_NEAR(got[o], want[o], 1e-6);
    for (std::size_t k = 0; k < head.params().count(); ++k)
        std::fill(head.params()[k].value.begin(), head.params()[k].value.end(), 0.0f);
    for (double v : softmax_of(head.forward(e))) EXPECT_DOUBLE_EQ(v, 0.25);
}

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tfcl/augment/temporal.hpp"
#include "tfcl/augment/timefreq.hpp"
#include "tfcl/core/error.hpp"
#include "tfcl/core/rng.hpp"

namespace tfcl::augment {

/// composed: every step fires independently with its probability.
/// single: each view gets exactly one uniformly chosen step (the
/// one-transform-at-a-time ablation protocol).
enum class PipelineMode { Composed, Single };

inline std::string to_string(PipelineMode m) { return m == PipelineMode::Composed ? "composed" : "single"; }

inline PipelineMode pipeline_mode_from_string(const std::string& s) {
    if (s == "composed") return PipelineMode::Composed;
    if (s == "single" || s == "paper-ablation") return PipelineMode::Single;
    fail(ErrorCode::ConfigInvalid, "unknown augmentation mode '" + s + "'");
}

template <class Spec>
struct AugmentStep {
    Spec spec;
    double probability = 0.5;
};

template <class Spec>
struct AugmentPipeline {
    std::vector<AugmentStep<Spec>> steps;
    PipelineMode mode = PipelineMode::Composed;
};

using TemporalPipeline = AugmentPipeline<TemporalSpec>;
using TimeFreqPipeline = AugmentPipeline<TimeFreqSpec>;

inline Tensor<double> apply_step(const Tensor<double>& v, const TemporalSpec& spec, RngStream& rng) {
    return apply_temporal(v, spec, rng);
}

inline dataio::SignalWindow apply_step(const dataio::SignalWindow& w, const TemporalSpec& spec, RngStream& rng) {
    return apply_temporal(w, spec, rng);
}

inline Scalogram apply_step(const Scalogram& s, const TimeFreqSpec& spec, RngStream& rng) {
    return apply_timefreq(s, spec, rng);
}

/// One stochastic pass. Step k draws from rng.split(k + 1), so a step's
/// consumption never shifts the draws of later steps.
template <class Sample, class Spec>
Sample augment(const Sample& sample, const AugmentPipeline<Spec>& pipeline, RngStream rng) {
    require(!pipeline.steps.empty(), ErrorCode::EmptyPipeline, "augmentation pipeline is empty");
    if (pipeline.mode == PipelineMode::Single) {
        const std::size_t pick = rng.index(pipeline.steps.size());
        RngStream step_rng = rng.split(pick + 1);
        return apply_step(sample, pipeline.steps[pick].spec, step_rng);
    }
    Sample out = sample;
    for (std::size_t k = 0; k < pipeline.steps.size(); ++k) {
        if (!rng.bernoulli(pipeline.steps[k].probability)) continue;
        RngStream step_rng = rng.split(k + 1);
        out = apply_step(out, pipeline.steps[k].spec, step_rng);
    }
    return out;
}

/// Two independent passes on sub-streams 0 and 1 of `rng`.
template <class Sample, class Spec>
std::pair<Sample, Sample> make_views(const Sample& sample, const AugmentPipeline<Spec>& pipeline,
                                     const RngStream& rng) {
    require(!pipeline.steps.empty(), ErrorCode::EmptyPipeline, "augmentation pipeline is empty");
    return {augment(sample, pipeline, rng.split(0)), augment(sample, pipeline, rng.split(1))};
}

}  // namespace tfcl::augment

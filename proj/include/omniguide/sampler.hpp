#pragma once

#include "omniguide/logit_source.hpp"
#include "omniguide/numerics.hpp"

#include <cstdint>
#include <random>
#include <span>

namespace omniguide {

enum class SamplingMode { sample, greedy };

struct SamplerConfig {
    double temperature = 0.6;
    double top_p = 0.95;
    double repetition_penalty = 1.03;
    SamplingMode mode = SamplingMode::sample;
    std::uint64_t seed = 0;
    /// Whether prompt tokens count as history for the repetition penalty.
    bool penalize_prompt = true;

    void validate() const;
};

/// Each decode job owns one generator.
using Rng = std::mt19937_64;

/// For every distinct token in history: positive logits are divided by the
/// penalty, non-positive ones multiplied by it.
LogitVector apply_repetition_penalty(std::span<const double> logits, std::span<const TokenId> history,
                                     double penalty);

/// Keeps the smallest highest-probability prefix whose mass reaches top_p and
/// renormalizes. Ties sort by lower token id; the top token always survives.
ProbDist top_p_filter(const ProbDist& dist, double top_p);

/// Lowest index among the maxima.
TokenId argmax(std::span<const double> values);

/// Distribution the sampler draws from: penalty, temperature, softmax, top-p.
ProbDist sampling_distribution(std::span<const double> logits, const SamplerConfig& cfg,
                               std::span<const TokenId> history);

TokenId sample_token(std::span<const double> logits, const SamplerConfig& cfg, std::span<const TokenId> history,
                     Rng& rng);

}  // namespace omniguide

#pragma once

#include "omniguide/numerics.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace omniguide {

enum class Strategy {
    none,             // base model alone
    fixed_contrast,   // z_base + alpha (z_pos - z_neg) with pluggable roles
    lrm_guide_fixed,  // z_base + alpha (z_guide - z_text_only)
    stepwise,         // divergence-driven alpha_r, normalized two-term mix
    vcd_ablation,     // z_base + alpha (z_base - z_text_only)
    average_fusion,   // (z_base + z_guide) / 2
};

std::string_view to_string(Strategy s) noexcept;
std::optional<Strategy> parse_strategy(std::string_view name) noexcept;

/// Whether the strategy reads the reasoning-guide branch / text-only branch.
bool needs_guide(Strategy s) noexcept;
bool needs_negative(Strategy s) noexcept;

struct GuidanceConfig {
    Strategy strategy = Strategy::stepwise;
    double alpha = 1.0;
    std::size_t warmup_steps = 5;
    double warmup_slope = 0.1;
    double clip_lo = 0.0;
    double clip_hi = 1.0;

    /// Throws Errc::validation. The stepwise strategy also requires the clip
    /// window inside [0, 1] so that alpha_r stays a convex weight.
    void validate() const;
};

struct StepWeights {
    double alpha_r = 0.0;
    double alpha_p = 0.0;
    double d_r = 0.0;
    double d_p = 0.0;
};

LogitVector fixed_contrast(std::span<const double> z_base, std::span<const double> z_pos,
                           std::span<const double> z_neg, double alpha);

/// Reasoner-guided contrast: z_pos is the guide, z_neg the base model without modalities.
LogitVector lrm_guide_fixed(std::span<const double> z_base, std::span<const double> z_guide,
                            std::span<const double> z_neg, double alpha);

/// Clip of the reasoning surplus d_r - d_p, then the warmup cap
/// min(alpha_r, slope * t) for t <= warmup_steps. t starts at 1.
StepWeights weights_from_divergences(double d_r, double d_p, std::size_t t, const GuidanceConfig& cfg);

/// d_r = JS(p_guide || p_neg), d_p = JS(p_omni || p_neg), then weights_from_divergences.
StepWeights stepwise_alpha(const ProbDist& p_guide, const ProbDist& p_omni, const ProbDist& p_neg, std::size_t t,
                           const GuidanceConfig& cfg);

/// (2 - alpha_r) z_base + alpha_r z_guide - z_neg. alpha_r must lie in [0, 1].
LogitVector stepwise_mix(std::span<const double> z_base, std::span<const double> z_guide,
                         std::span<const double> z_neg, double alpha_r);

LogitVector vcd_ablation_mix(std::span<const double> z_base, std::span<const double> z_neg, double alpha);

LogitVector average_fusion(std::span<const double> z_base, std::span<const double> z_guide);

/// Logits of every branch at one step. Absent branches are empty spans.
struct BranchLogits {
    std::span<const double> base;
    std::span<const double> negative;
    std::span<const double> guide;
};

struct FusedStep {
    LogitVector logits;
    StepWeights weights;
};

/// Applies the configured strategy. Fixed strategies report alpha_r = alpha
/// and alpha_p = 0; only stepwise fills the divergences.
FusedStep fuse(const GuidanceConfig& cfg, const BranchLogits& branches, std::size_t t);

}  // namespace omniguide

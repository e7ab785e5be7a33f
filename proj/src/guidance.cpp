#include "omniguide/guidance.hpp"

#include "omniguide/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace omniguide {

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 6> kNames{{
    {Strategy::none, "none"},
    {Strategy::fixed_contrast, "fixed_contrast"},
    {Strategy::lrm_guide_fixed, "lrm_guide_fixed"},
    {Strategy::stepwise, "stepwise"},
    {Strategy::vcd_ablation, "vcd_ablation"},
    {Strategy::average_fusion, "average_fusion"},
}};

void require_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(Errc::dimension,
                    "logit lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

void require_finite_scalar(double v, const char* what) {
    if (!std::isfinite(v)) throw Error(Errc::invalid_input, std::string(what) + " must be finite");
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
    for (const auto& [value, name] : kNames) {
        if (value == s) return name;
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) noexcept {
    for (const auto& [value, n] : kNames) {
        if (n == name) return value;
    }
    return std::nullopt;
}

bool needs_guide(Strategy s) noexcept {
    return s == Strategy::fixed_contrast || s == Strategy::lrm_guide_fixed || s == Strategy::stepwise ||
           s == Strategy::average_fusion;
}

bool needs_negative(Strategy s) noexcept {
    return s == Strategy::fixed_contrast || s == Strategy::lrm_guide_fixed || s == Strategy::stepwise ||
           s == Strategy::vcd_ablation;
}

void GuidanceConfig::validate() const {
    if (!std::isfinite(alpha)) throw Error(Errc::validation, "alpha must be finite");
    if (!std::isfinite(warmup_slope) || warmup_slope < 0.0) {
        throw Error(Errc::validation, "warmup_slope must be finite and >= 0");
    }
    if (!std::isfinite(clip_lo) || !std::isfinite(clip_hi) || clip_lo > clip_hi) {
        throw Error(Errc::validation, "clip bounds must be finite with clip_lo <= clip_hi");
    }
    if (strategy == Strategy::stepwise && (clip_lo < 0.0 || clip_hi > 1.0)) {
        throw Error(Errc::validation, "stepwise clip bounds must lie within [0, 1]");
    }
}

LogitVector fixed_contrast(std::span<const double> z_base, std::span<const double> z_pos,
                           std::span<const double> z_neg, double alpha) {
    require_lengths(z_base, z_pos);
    require_lengths(z_base, z_neg);
    require_finite_scalar(alpha, "alpha");
    LogitVector out(z_base.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = z_base[i] + alpha * (z_pos[i] - z_neg[i]);
    return out;
}

LogitVector lrm_guide_fixed(std::span<const double> z_base, std::span<const double> z_guide,
                            std::span<const double> z_neg, double alpha) {
    return fixed_contrast(z_base, z_guide, z_neg, alpha);
}

StepWeights weights_from_divergences(double d_r, double d_p, std::size_t t, const GuidanceConfig& cfg) {
    if (t == 0) throw Error(Errc::contract, "step index starts at 1");
    StepWeights w;
    w.d_r = d_r;
    w.d_p = d_p;
    w.alpha_r = std::clamp(d_r - d_p, cfg.clip_lo, cfg.clip_hi);
    if (t <= cfg.warmup_steps) w.alpha_r = std::min(w.alpha_r, cfg.warmup_slope * static_cast<double>(t));
    w.alpha_p = 1.0 - w.alpha_r;
    return w;
}

StepWeights stepwise_alpha(const ProbDist& p_guide, const ProbDist& p_omni, const ProbDist& p_neg, std::size_t t,
                           const GuidanceConfig& cfg) {
    return weights_from_divergences(js_divergence(p_guide, p_neg), js_divergence(p_omni, p_neg), t, cfg);
}

LogitVector stepwise_mix(std::span<const double> z_base, std::span<const double> z_guide,
                         std::span<const double> z_neg, double alpha_r) {
    require_lengths(z_base, z_guide);
    require_lengths(z_base, z_neg);
    if (!(alpha_r >= 0.0 && alpha_r <= 1.0)) {
        throw Error(Errc::contract, "alpha_r " + std::to_string(alpha_r) + " outside [0, 1]");
    }
    LogitVector out(z_base.size());
    const double base_weight = 2.0 - alpha_r;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = base_weight * z_base[i] + alpha_r * z_guide[i] - z_neg[i];
    }
    return out;
}

LogitVector vcd_ablation_mix(std::span<const double> z_base, std::span<const double> z_neg, double alpha) {
    return fixed_contrast(z_base, z_base, z_neg, alpha);
}

LogitVector average_fusion(std::span<const double> z_base, std::span<const double> z_guide) {
    require_lengths(z_base, z_guide);
    LogitVector out(z_base.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (z_base[i] + z_guide[i]);
    return out;
}

FusedStep fuse(const GuidanceConfig& cfg, const BranchLogits& b, std::size_t t) {
    FusedStep step;
    switch (cfg.strategy) {
    case Strategy::none:
        step.logits.assign(b.base.begin(), b.base.end());
        break;
    case Strategy::fixed_contrast:
        step.logits = fixed_contrast(b.base, b.guide, b.negative, cfg.alpha);
        step.weights.alpha_r = cfg.alpha;
        break;
    case Strategy::lrm_guide_fixed:
        step.logits = lrm_guide_fixed(b.base, b.guide, b.negative, cfg.alpha);
        step.weights.alpha_r = cfg.alpha;
        break;
    case Strategy::vcd_ablation:
        step.logits = vcd_ablation_mix(b.base, b.negative, cfg.alpha);
        step.weights.alpha_r = cfg.alpha;
        break;
    case Strategy::average_fusion:
        step.logits = average_fusion(b.base, b.guide);
        step.weights.alpha_r = 0.5;
        break;
    case Strategy::stepwise:
        step.weights = stepwise_alpha(softmax(b.guide), softmax(b.base), softmax(b.negative), t, cfg);
        step.logits = stepwise_mix(b.base, b.guide, b.negative, step.weights.alpha_r);
        break;
    }
    return step;
}

}  // namespace omniguide

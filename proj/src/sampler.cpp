#include "omniguide/sampler.hpp"

#include "omniguide/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace omniguide {

void SamplerConfig::validate() const {
    if (!std::isfinite(temperature) || temperature <= 0.0) {
        throw Error(Errc::validation, "temperature must be > 0");
    }
    if (!std::isfinite(top_p) || top_p <= 0.0 || top_p > 1.0) {
        throw Error(Errc::validation, "top_p must lie in (0, 1]");
    }
    if (!std::isfinite(repetition_penalty) || repetition_penalty < 1.0) {
        throw Error(Errc::validation, "repetition_penalty must be >= 1");
    }
}

LogitVector apply_repetition_penalty(std::span<const double> logits, std::span<const TokenId> history,
                                     double penalty) {
    LogitVector out(logits.begin(), logits.end());
    if (penalty == 1.0) return out;
    std::unordered_set<TokenId> seen;
    for (TokenId t : history) {
        if (t >= out.size() || !seen.insert(t).second) continue;
        double& z = out[t];
        z = z > 0.0 ? z / penalty : z * penalty;
    }
    return out;
}

ProbDist top_p_filter(const ProbDist& dist, double top_p) {
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });

    std::vector<double> kept(dist.size(), 0.0);
    double mass = 0.0;
    for (std::size_t idx : order) {
        kept[idx] = dist[idx];
        mass += dist[idx];
        if (mass >= top_p - 1e-12) break;
    }
    for (double& p : kept) p /= mass;
    return ProbDist(std::move(kept));
}

TokenId argmax(std::span<const double> values) {
    if (values.empty()) throw Error(Errc::invalid_input, "argmax of empty vector");
    return static_cast<TokenId>(std::max_element(values.begin(), values.end()) - values.begin());
}

ProbDist sampling_distribution(std::span<const double> logits, const SamplerConfig& cfg,
                               std::span<const TokenId> history) {
    require_finite(logits);
    LogitVector z = apply_repetition_penalty(logits, history, cfg.repetition_penalty);
    for (double& v : z) v /= cfg.temperature;
    return top_p_filter(softmax(z), cfg.top_p);
}

TokenId sample_token(std::span<const double> logits, const SamplerConfig& cfg, std::span<const TokenId> history,
                     Rng& rng) {
    require_finite(logits);
    if (cfg.mode == SamplingMode::greedy) {
        LogitVector z = apply_repetition_penalty(logits, history, cfg.repetition_penalty);
        for (double& v : z) v /= cfg.temperature;
        return argmax(z);
    }
    const ProbDist dist = sampling_distribution(logits, cfg, history);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    TokenId last_positive = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] <= 0.0) continue;
        cumulative += dist[i];
        last_positive = static_cast<TokenId>(i);
        if (u < cumulative) return last_positive;
    }
    return last_positive;
}

}  // namespace omniguide

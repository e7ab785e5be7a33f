#include "omniguide/numerics.hpp"

#include "omniguide/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace omniguide {

namespace {

void require_same_length(const ProbDist& p, const ProbDist& q) {
    if (p.size() != q.size()) {
        throw Error(Errc::dimension, "distribution lengths differ: " + std::to_string(p.size()) +
                                         " vs " + std::to_string(q.size()));
    }
}

}  // namespace

void require_finite(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(Errc::invalid_input, "non-finite value at index " + std::to_string(i));
        }
    }
}

ProbDist ProbDist::from_probs(std::vector<double> probs) {
    if (probs.empty()) {
        throw Error(Errc::invalid_input, "empty distribution");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
            throw Error(Errc::invalid_input,
                        "probability at index " + std::to_string(i) + " is negative or non-finite");
        }
        total += probs[i];
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        throw Error(Errc::invalid_input, "probabilities sum to " + std::to_string(total));
    }
    return ProbDist(std::move(probs));
}

double log_sum_exp(std::span<const double> logits) {
    require_finite(logits);
    if (logits.empty()) {
        throw Error(Errc::invalid_input, "empty logit vector");
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - peak);
    return peak + std::log(sum);
}

ProbDist softmax(std::span<const double> logits) {
    require_finite(logits);
    if (logits.empty()) {
        throw Error(Errc::invalid_input, "empty logit vector");
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - peak);
        sum += probs[i];
    }
    // sum >= 1 because the peak contributes exp(0)
    for (double& p : probs) p /= sum;
    return ProbDist(std::move(probs));
}

double kl_divergence(const ProbDist& p, const ProbDist& q) {
    require_same_length(p, q);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
        total += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(total, 0.0);
}

double js_divergence(const ProbDist& p, const ProbDist& q) {
    require_same_length(p, q);
    // p·ln(p/m) with m = (p+q)/2 written as p·ln(2p/(p+q)); the mixture is
    // positive wherever either side is.
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i];
        const double b = q[i];
        const double sum = a + b;
        if (a > 0.0) total += a * std::log(2.0 * a / sum);
        if (b > 0.0) total += b * std::log(2.0 * b / sum);
    }
    return std::clamp(0.5 * total, 0.0, std::log(2.0));
}

}  // namespace omniguide

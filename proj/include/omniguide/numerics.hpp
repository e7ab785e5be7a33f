#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace omniguide {

/// Unnormalized next-token scores, one per vocabulary entry.
using LogitVector = std::vector<double>;

/// Normalized distribution over the vocabulary. Entries are non-negative and
/// sum to one within 1e-9; the constructors enforce it.
class ProbDist {
public:
    /// Validates and wraps an existing probability vector.
    static ProbDist from_probs(std::vector<double> probs);

    std::span<const double> probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }

private:
    explicit ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {}
    friend ProbDist softmax(std::span<const double> logits);
    friend ProbDist top_p_filter(const ProbDist& dist, double top_p);

    std::vector<double> probs_;
};

inline constexpr double kDistributionTolerance = 1e-9;

/// Throws Errc::invalid_input naming the first non-finite index.
void require_finite(std::span<const double> values);

/// Max-subtracted softmax. Shift invariant; never overflows for finite input.
ProbDist softmax(std::span<const double> logits);

/// log(sum(exp(x))) with max subtraction.
double log_sum_exp(std::span<const double> logits);

/// KL(p||q) in nats, with 0·log(0/x) = 0. Returns +infinity when some p_i > 0
/// meets q_i = 0; check std::isfinite on the result.
double kl_divergence(const ProbDist& p, const ProbDist& q);

/// Jensen-Shannon divergence in nats; result lies in [0, ln 2].
double js_divergence(const ProbDist& p, const ProbDist& q);

}  // namespace omniguide

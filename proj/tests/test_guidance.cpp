#include "omniguide/error.hpp"
#include "omniguide/guidance.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace omniguide;
using V = std::vector<double>;

TEST_CASE("strategy names round-trip") {
    for (auto s : {Strategy::none, Strategy::fixed_contrast, Strategy::lrm_guide_fixed, Strategy::stepwise,
                   Strategy::vcd_ablation, Strategy::average_fusion}) {
        CHECK(parse_strategy(to_string(s)) == s);
    }
    CHECK_FALSE(parse_strategy("bogus").has_value());
    CHECK(needs_guide(Strategy::stepwise));
    CHECK_FALSE(needs_guide(Strategy::vcd_ablation));
    CHECK(needs_negative(Strategy::vcd_ablation));
    CHECK_FALSE(needs_negative(Strategy::average_fusion));
}

TEST_CASE("fixed_contrast examples") {
    std::mt19937_64 rng(3);
    const V base = testsupport::random_logits(rng, 8);
    const V pos = testsupport::random_logits(rng, 8);
    const V neg = testsupport::random_logits(rng, 8);
    CHECK(fixed_contrast(base, pos, neg, 0.0) == base);
    for (double a : {0.3, 1.0, 4.0}) CHECK(fixed_contrast(base, pos, pos, a) == base);
    CHECK(fixed_contrast(V{1, 2}, V{3, 0}, V{1, 1}, 0.5) == V{2, 1.5});
    CHECK_THROWS_AS(fixed_contrast(V{1, 2}, V{3}, V{1, 1}, 0.5), Error);
}

TEST_CASE("lrm_guide_fixed examples") {
    CHECK(lrm_guide_fixed(V{0, 0}, V{2, 0}, V{0, 0}, 1.0) == V{2, 0});
    const V base{0.5, -1, 3};
    const V r{1, 2, 3};
    CHECK(lrm_guide_fixed(base, r, r, 7.0) == base);
    CHECK(lrm_guide_fixed(base, r, V{0, 0, 0}, 0.0) == base);
}

TEST_CASE("weights_from_divergences examples") {
    GuidanceConfig cfg;
    auto w = weights_from_divergences(0.8, 0.3, 100, cfg);
    CHECK(w.alpha_r == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w.alpha_p == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(weights_from_divergences(1.5, 0.1, 100, cfg).alpha_r == 1.0);
    CHECK(weights_from_divergences(0.95, 0.05, 2, cfg).alpha_r == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(weights_from_divergences(0.1, 0.4, 50, cfg).alpha_r == 0.0);
    CHECK(weights_from_divergences(0.1, 0.4, 50, cfg).alpha_p == 1.0);
    CHECK_THROWS_AS(weights_from_divergences(0.5, 0.1, 0, cfg), Error);

    // warmup cap is exactly slope * t and lifts after warmup_steps
    for (std::size_t t = 1; t <= 5; ++t) {
        CHECK(weights_from_divergences(0.7, 0.0, t, cfg).alpha_r == std::min(0.7, 0.1 * static_cast<double>(t)));
    }
    CHECK(weights_from_divergences(0.69, 0.0, 6, cfg).alpha_r == doctest::Approx(0.69));
}

TEST_CASE("stepwise_mix endpoints and expansion") {
    const V b{1, -2, 0.5};
    const V r{0.25, 3, -1};
    const V n{2, 0, 1};
    const V at1 = stepwise_mix(b, r, n, 1.0);
    const V at0 = stepwise_mix(b, r, n, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(at1[i] == doctest::Approx(b[i] + r[i] - n[i]).epsilon(1e-15));
        CHECK(at0[i] == doctest::Approx(2 * b[i] - n[i]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(stepwise_mix(b, r, n, 1.5), Error);
    CHECK_THROWS_AS(stepwise_mix(b, r, n, -0.1), Error);

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const V zb = testsupport::random_logits(rng, 16, 10.0);
        const V zr = testsupport::random_logits(rng, 16, 10.0);
        const V zn = testsupport::random_logits(rng, 16, 10.0);
        const double a = unit(rng);
        const V mix = stepwise_mix(zb, zr, zn, a);
        for (std::size_t i = 0; i < zb.size(); ++i) {
            const double expanded = zb[i] + a * (zr[i] - zn[i]) + (1 - a) * (zb[i] - zn[i]);
            worst = std::max(worst, std::abs(mix[i] - expanded));
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("vcd_ablation and average_fusion examples") {
    const V b{1, 0};
    CHECK(vcd_ablation_mix(b, V{0, 1}, 0.0) == b);
    CHECK(vcd_ablation_mix(b, b, 3.0) == b);
    CHECK(vcd_ablation_mix(b, V{0, 1}, 1.0) == V{2, -1});
    CHECK(average_fusion(b, b) == b);
    CHECK(average_fusion(V{2, 0}, V{0, 2}) == V{1, 1});
}

TEST_CASE("config validation") {
    GuidanceConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.clip_hi = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.strategy = Strategy::lrm_guide_fixed;
    CHECK_NOTHROW(cfg.validate());
    cfg.clip_lo = 2.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    GuidanceConfig nan_alpha;
    nan_alpha.alpha = std::nan("");
    CHECK_THROWS_AS(nan_alpha.validate(), Error);
}

TEST_CASE("fuse dispatches and reports weights") {
    const V b{1, 0, -1};
    const V n{0, 1, 0};
    const V g{2, 2, 0};
    const BranchLogits branches{b, n, g};
    GuidanceConfig cfg;

    cfg.strategy = Strategy::none;
    auto f = fuse(cfg, branches, 1);
    CHECK(f.logits == b);
    CHECK(f.weights.alpha_r == 0.0);

    cfg.strategy = Strategy::lrm_guide_fixed;
    cfg.alpha = 0.5;
    f = fuse(cfg, branches, 1);
    CHECK(f.logits == lrm_guide_fixed(b, g, n, 0.5));
    CHECK(f.weights.alpha_r == 0.5);
    CHECK(f.weights.alpha_p == 0.0);

    cfg.strategy = Strategy::average_fusion;
    CHECK(fuse(cfg, branches, 1).logits == average_fusion(b, g));

    cfg.strategy = Strategy::stepwise;
    f = fuse(cfg, branches, 3);
    const auto w = stepwise_alpha(softmax(g), softmax(b), softmax(n), 3, cfg);
    CHECK(f.weights.alpha_r == w.alpha_r);
    CHECK(f.weights.d_r == w.d_r);
    CHECK(f.logits == stepwise_mix(b, g, n, w.alpha_r));
    CHECK(f.weights.alpha_r + f.weights.alpha_p == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("stepwise weights stay a convex pair on random steps") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> step(1, 40);
    GuidanceConfig cfg;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t t = step(rng);
        const V g = testsupport::random_logits(rng, 12);
        const V b = testsupport::random_logits(rng, 12);
        const V n = testsupport::random_logits(rng, 12);
        const auto w = stepwise_alpha(softmax(g), softmax(b), softmax(n), t, cfg);
        CHECK(w.alpha_r >= 0.0);
        CHECK(w.alpha_r <= 1.0);
        CHECK(std::abs(w.alpha_r + w.alpha_p - 1.0) <= 1e-12);
        if (t <= 5) CHECK(w.alpha_r <= 0.1 * static_cast<double>(t));
    }
}

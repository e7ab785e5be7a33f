#include "omniguide/error.hpp"
#include "omniguide/sampler.hpp"
#include "omniguide/toy_model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace omniguide;

namespace {

double max_abs_diff(const LogitVector& a, const LogitVector& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::shared_ptr<ToyModel> abx_model() {
    return build_toy_model(parse_toy_spec("@vocab A B X Y\n@context_limit 4\nA | B | 3\n"));
}

}  // namespace

TEST_CASE("vocabulary compatibility") {
    const auto a = Vocabulary::from_tokens({"a", "b", "c"});
    const auto b = Vocabulary::from_tokens({"a", "b", "c"});
    const auto c = Vocabulary::from_tokens({"a", "b", "d"});
    CHECK(check_compatibility(a, b).ok());
    const auto fp = check_compatibility(a, c);
    CHECK_FALSE(fp.ok());
    CHECK(fp.describe() == "mismatch(fingerprint)");

    Vocabulary big{151000, "aaaa", {}};
    Vocabulary bigger{152000, "aaaa", {}};
    CHECK(check_compatibility(big, bigger).describe().find("mismatch(size)") != std::string::npos);
    CHECK(a.find("c") == TokenId{2});
    CHECK_FALSE(a.find("zz").has_value());
    CHECK(fingerprint_tokens({"a", "b"}) != fingerprint_tokens({"ab"}));
    CHECK(fingerprint_tokens({"a"}).size() == 16);
}

TEST_CASE("prefill examples") {
    auto model = abx_model();
    auto pre = model->prefill(PromptInput{{0}, std::nullopt});
    CHECK(argmax(pre.logits) == 1);
    CHECK_THROWS_AS(model->prefill(PromptInput{{}, std::nullopt}), Error);
    try {
        model->prefill(PromptInput{{0, 0, 0, 0, 0}, std::nullopt});
        FAIL("expected capacity error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::capacity);
        CHECK(std::string(e.what()).find("4") != std::string::npos);
    }
    CHECK_THROWS_AS(model->prefill(PromptInput{{9}, std::nullopt}), Error);
    const auto other = Vocabulary::from_tokens({"A", "B", "X", "Z"});
    try {
        model->prefill(PromptInput{{0}, std::nullopt}, other);
        FAIL("expected incompatibility");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::incompatible);
    }
}

TEST_CASE("session lifecycle") {
    auto model = abx_model();
    auto pre = model->prefill(PromptInput{{0}, std::nullopt});
    auto& s = pre.session;
    CHECK(s.live());
    CHECK(s.token_count() == 1);
    try {
        s.step(4);
        FAIL("expected range error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::range);
    }
    s.step(1);
    s.step(2);
    s.step(3);
    CHECK(s.token_count() == 4);
    try {
        s.step(0);
        FAIL("expected capacity error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::capacity);
    }
    s.close();
    CHECK_NOTHROW(s.close());
    CHECK_FALSE(s.live());
    try {
        s.step(0);
        FAIL("expected lifecycle error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::lifecycle);
    }
}

TEST_CASE("toy spec parsing") {
    const auto spec = parse_toy_spec("@vocab Q X Y\nQ | X | 5\n@omni pic\nQ | Y | 9\n");
    auto model = build_toy_model(spec);
    const std::vector<TokenId> q{0};
    CHECK(model->evaluate(q, std::nullopt) == LogitVector{0, 5, 0});
    const auto with = model->evaluate(q, OmniPayload{"image/png", "  pic\n"});
    CHECK(argmax(with) == 2);
    CHECK(with[1] == 5);
    const std::vector<TokenId> x{1};
    CHECK(model->evaluate(x, std::nullopt) == LogitVector{0, 0, 0});
    CHECK(model->evaluate(q, OmniPayload{"image/png", "other"}) == LogitVector{0, 5, 0});

    CHECK_THROWS_AS(parse_toy_spec("@vocab Q X\nQ | Z | 1\n"), Error);
    CHECK_THROWS_AS(parse_toy_spec("@vocab Q X\nQ | X\n"), Error);
    CHECK_THROWS_AS(parse_toy_spec("@vocab Q X\nQ | X | abc\n"), Error);
    CHECK_THROWS_AS(build_toy_model(parse_toy_spec("@vocab Q X\nQ | X | 1\nQ | X | 2\n")), Error);
    try {
        parse_toy_spec("@vocab Q X\n\n@bogus\n");
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::validation);
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    CHECK_THROWS_AS(load_toy_spec("/nonexistent/spec.toy"), Error);
}

TEST_CASE("longest suffix wins over shorter contexts") {
    auto model = build_toy_model(parse_toy_spec("@vocab a b c\n| a | 1\nb | b | 2\na b | c | 3\n"));
    CHECK(model->evaluate(std::vector<TokenId>{2}, std::nullopt) == LogitVector{1, 0, 0});
    CHECK(model->evaluate(std::vector<TokenId>{2, 1}, std::nullopt) == LogitVector{0, 2, 0});
    CHECK(model->evaluate(std::vector<TokenId>{0, 1}, std::nullopt) == LogitVector{0, 0, 3});
}

TEST_CASE("incremental stepping matches fresh prefill") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto model = build_toy_model(testsupport::random_toy_spec(rng, 12, 60), "rand");
        const std::optional<OmniPayload> omni =
            trial % 2 == 0 ? std::optional<OmniPayload>(OmniPayload{"image/png", "img"}) : std::nullopt;
        const auto seq = testsupport::random_tokens(rng, 64, 12);
        auto pre = model->prefill(PromptInput{{seq[0]}, omni});
        CHECK(max_abs_diff(pre.logits, model->evaluate(std::span(seq).first(1), omni)) <= 1e-9);
        for (std::size_t n = 1; n < seq.size(); ++n) {
            const auto stepped = pre.session.step(seq[n]);
            const auto fresh = model->prefill(PromptInput{{seq.begin(), seq.begin() + n + 1}, omni});
            CHECK(max_abs_diff(stepped, fresh.logits) <= 1e-9);
        }
    }
}

TEST_CASE("interleaved sessions equal solo runs") {
    std::mt19937_64 rng(21);
    auto model = build_toy_model(testsupport::random_toy_spec(rng, 10, 50), "rand");
    const auto a = testsupport::random_tokens(rng, 20, 10);
    const auto b = testsupport::random_tokens(rng, 20, 10);
    auto solo = [&](const std::vector<TokenId>& seq) {
        std::vector<LogitVector> out;
        auto pre = model->prefill(PromptInput{{seq[0]}, std::nullopt});
        out.push_back(pre.logits);
        for (std::size_t i = 1; i < seq.size(); ++i) out.push_back(pre.session.step(seq[i]));
        return out;
    };
    const auto solo_a = solo(a);
    const auto solo_b = solo(b);
    auto pa = model->prefill(PromptInput{{a[0]}, std::nullopt});
    auto pb = model->prefill(PromptInput{{b[0]}, std::nullopt});
    CHECK(pa.logits == solo_a[0]);
    CHECK(pb.logits == solo_b[0]);
    for (std::size_t i = 1; i < a.size(); ++i) {
        CHECK(pa.session.step(a[i]) == solo_a[i]);
        CHECK(pb.session.step(b[i]) == solo_b[i]);
    }
}

TEST_CASE("evaluation is deterministic") {
    std::mt19937_64 rng(4);
    const auto spec = testsupport::random_toy_spec(rng, 9, 40);
    const auto seq = testsupport::random_tokens(rng, 10, 9);
    const auto x = build_toy_model(spec)->prefill(PromptInput{seq, std::nullopt}).logits;
    const auto y = build_toy_model(spec)->prefill(PromptInput{seq, std::nullopt}).logits;
    CHECK(x == y);
}

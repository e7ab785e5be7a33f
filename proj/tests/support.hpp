#pragma once

#include "omniguide/decoder.hpp"
#include "omniguide/error.hpp"
#include "omniguide/toy_model.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testsupport {

using namespace omniguide;

inline std::filesystem::path data_dir() { return OMNIGUIDE_TEST_DATA; }
inline std::filesystem::path cli_binary() { return OMNIGUIDE_CLI_BINARY; }

inline std::vector<double> random_logits(std::mt19937_64& rng, std::size_t n, double scale = 5.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

/// Random simplex point; `sparse` zeros out some entries.
inline std::vector<double> random_dist(std::mt19937_64& rng, std::size_t n, bool sparse = false) {
    std::exponential_distribution<double> e(1.0);
    std::bernoulli_distribution drop(0.3);
    std::vector<double> v(n);
    double sum = 0.0;
    for (auto& x : v) {
        x = sparse && drop(rng) ? 0.0 : e(rng);
        sum += x;
    }
    if (sum == 0.0) {
        v[0] = 1.0;
        sum = 1.0;
    }
    for (auto& x : v) x /= sum;
    return v;
}

/// Random n-gram table over `vocab_size` tokens named t0..tN, with payload rows under "img".
inline ToySpec random_toy_spec(std::mt19937_64& rng, std::size_t vocab_size, std::size_t rules,
                               std::size_t context_limit = 128) {
    ToySpec spec;
    for (std::size_t i = 0; i < vocab_size; ++i) spec.vocab.push_back("t" + std::to_string(i));
    spec.context_limit = context_limit;
    std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab_size - 1));
    std::uniform_int_distribution<int> len(0, 2);
    std::uniform_real_distribution<double> score(-3.0, 6.0);
    std::set<std::pair<std::vector<TokenId>, TokenId>> seen;
    auto make = [&](std::vector<ToyRule>& out, std::size_t count) {
        seen.clear();
        for (std::size_t i = 0; i < count; ++i) {
            ToyRule r;
            const int l = len(rng);
            for (int k = 0; k < l; ++k) r.context.push_back(tok(rng));
            r.next = tok(rng);
            r.score = score(rng);
            if (seen.insert({r.context, r.next}).second) out.push_back(std::move(r));
        }
    };
    make(spec.rules, rules);
    make(spec.omni["img"], rules / 2);
    return spec;
}

inline std::vector<TokenId> random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t vocab_size) {
    std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab_size - 1));
    std::vector<TokenId> out(n);
    for (auto& t : out) t = tok(rng);
    return out;
}

inline std::shared_ptr<ToyModel> load_testbed(const std::string& which) {
    return build_toy_model(load_toy_spec(data_dir() / ("testbed_" + which + ".toy")), which);
}

inline OmniPayload color(const std::string& c) { return OmniPayload{"image/x-color", c}; }

/// Forwards to an inner source and records every prefill prompt and step token.
/// Optionally fails the N-th step call across all its sessions.
class ProbeSource final : public LogitSource {
public:
    explicit ProbeSource(std::shared_ptr<LogitSource> inner, long fail_on_step = -1)
        : inner_(std::move(inner)), fail_on_step_(fail_on_step) {}

    std::string id() const override { return "probe:" + inner_->id(); }
    const Vocabulary& vocabulary() const override { return inner_->vocabulary(); }
    std::size_t context_limit() const override { return inner_->context_limit(); }

    std::vector<PromptInput> prompts() const {
        std::lock_guard lock(mutex_);
        return prompts_;
    }
    std::vector<TokenId> stepped() const {
        std::lock_guard lock(mutex_);
        return stepped_;
    }
    int live() const { return live_.load(); }

protected:
    Opened open(const PromptInput& input) override {
        Prefill p = inner_->prefill(input);
        {
            std::lock_guard lock(mutex_);
            prompts_.push_back(input);
        }
        ++live_;
        return {std::make_unique<Backend>(this, std::move(p.session)), std::move(p.logits)};
    }

private:
    struct Backend final : SessionBackend {
        Backend(ProbeSource* owner, Session s) : owner(owner), session(std::move(s)) {}
        LogitVector step(TokenId token) override {
            {
                std::lock_guard lock(owner->mutex_);
                if (owner->fail_on_step_ >= 0 && owner->steps_++ == owner->fail_on_step_) {
                    throw TransportError("probe", 1, false, std::chrono::milliseconds(0), "injected fault");
                }
                owner->stepped_.push_back(token);
            }
            return session.step(token);
        }
        void release() noexcept override {
            session.close();
            --owner->live_;
        }
        ProbeSource* owner;
        Session session;
    };

    std::shared_ptr<LogitSource> inner_;
    long fail_on_step_;
    long steps_ = 0;
    mutable std::mutex mutex_;
    std::vector<PromptInput> prompts_;
    std::vector<TokenId> stepped_;
    std::atomic<int> live_{0};
};

}  // namespace testsupport

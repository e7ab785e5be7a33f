#include "omniguide/logit_source.hpp"

#include "omniguide/error.hpp"

#include <array>
#include <cstdio>

namespace omniguide {

std::string fingerprint_tokens(const std::vector<std::string>& tokens) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](unsigned char c) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    };
    for (const auto& token : tokens) {
        for (unsigned char c : token) mix(c);
        mix(0);
    }
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf.data());
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.empty()) {
        throw Error(Errc::validation, "vocabulary must not be empty");
    }
    Vocabulary vocab;
    vocab.size = tokens.size();
    vocab.fingerprint = fingerprint_tokens(tokens);
    vocab.tokens = std::move(tokens);
    return vocab;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == token) return static_cast<TokenId>(i);
    }
    return std::nullopt;
}

std::string CompatibilityReport::describe() const {
    if (ok()) return "ok";
    std::string out = "mismatch(";
    if (!size_matches) out += "size";
    if (!size_matches && !fingerprint_matches) out += ",";
    if (!fingerprint_matches) out += "fingerprint";
    return out + ")";
}

CompatibilityReport check_compatibility(const Vocabulary& a, const Vocabulary& b) {
    CompatibilityReport report;
    report.size_matches = a.size == b.size;
    report.fingerprint_matches = a.fingerprint == b.fingerprint;
    return report;
}

Session::Session(std::string source_id, std::size_t token_count, std::size_t vocab_size,
                 std::size_t context_limit, std::unique_ptr<SessionBackend> backend)
    : source_id_(std::move(source_id)),
      token_count_(token_count),
      vocab_size_(vocab_size),
      context_limit_(context_limit),
      backend_(std::move(backend)) {}

Session& Session::operator=(Session&& other) noexcept {
    if (this != &other) {
        close();
        source_id_ = std::move(other.source_id_);
        token_count_ = other.token_count_;
        vocab_size_ = other.vocab_size_;
        context_limit_ = other.context_limit_;
        backend_ = std::move(other.backend_);
    }
    return *this;
}

Session::~Session() { close(); }

LogitVector Session::step(TokenId token) {
    if (!backend_) {
        throw Error(Errc::lifecycle, "step on closed session of source '" + source_id_ + "'");
    }
    if (token >= vocab_size_) {
        throw Error(Errc::range, "token id " + std::to_string(token) + " outside vocabulary of size " +
                                     std::to_string(vocab_size_));
    }
    if (token_count_ + 1 > context_limit_) {
        throw Error(Errc::capacity, "session would exceed context limit " + std::to_string(context_limit_));
    }
    LogitVector logits = backend_->step(token);
    if (logits.size() != vocab_size_) {
        throw Error(Errc::dimension, "source '" + source_id_ + "' returned " + std::to_string(logits.size()) +
                                         " logits, expected " + std::to_string(vocab_size_));
    }
    require_finite(logits);
    ++token_count_;
    return logits;
}

void Session::close() noexcept {
    if (backend_) {
        backend_->release();
        backend_.reset();
    }
}

Prefill LogitSource::prefill(const PromptInput& input) {
    if (input.tokens.empty()) {
        throw Error(Errc::precondition, "prompt token sequence is empty");
    }
    const auto& vocab = vocabulary();
    for (TokenId t : input.tokens) {
        if (t >= vocab.size) {
            throw Error(Errc::range, "prompt token id " + std::to_string(t) + " outside vocabulary of size " +
                                         std::to_string(vocab.size));
        }
    }
    const std::size_t limit = context_limit();
    if (input.tokens.size() > limit) {
        throw Error(Errc::capacity, "prompt of " + std::to_string(input.tokens.size()) +
                                        " tokens exceeds context limit " + std::to_string(limit) +
                                        " of source '" + id() + "'");
    }
    Opened opened = open(input);
    Prefill result{Session(id(), input.tokens.size(), vocab.size, limit, std::move(opened.backend)),
                   std::move(opened.logits)};
    if (result.logits.size() != vocab.size) {
        throw Error(Errc::dimension, "source '" + id() + "' returned " + std::to_string(result.logits.size()) +
                                         " logits, expected " + std::to_string(vocab.size));
    }
    require_finite(result.logits);
    return result;
}

Prefill LogitSource::prefill(const PromptInput& input, const Vocabulary& engine_vocabulary) {
    const auto report = check_compatibility(vocabulary(), engine_vocabulary);
    if (!report.ok()) {
        throw Error(Errc::incompatible, "source '" + id() + "' vocabulary " + report.describe());
    }
    return prefill(input);
}

}  // namespace omniguide

#pragma once

#include "omniguide/numerics.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace omniguide {

using TokenId = std::uint32_t;

/// Shared token space. Two sources can be fused only when both size and
/// fingerprint agree.
struct Vocabulary {
    std::size_t size = 0;
    std::string fingerprint;
    std::vector<std::string> tokens;  // empty when the backend does not expose strings

    static Vocabulary from_tokens(std::vector<std::string> tokens);

    bool has_strings() const noexcept { return tokens.size() == size && size > 0; }
    std::optional<TokenId> find(std::string_view token) const;
};

/// FNV-1a over the NUL-terminated token strings, as 16 hex digits.
std::string fingerprint_tokens(const std::vector<std::string>& tokens);

struct CompatibilityReport {
    bool size_matches = true;
    bool fingerprint_matches = true;

    bool ok() const noexcept { return size_matches && fingerprint_matches; }
    std::string describe() const;
};

CompatibilityReport check_compatibility(const Vocabulary& a, const Vocabulary& b);

/// Opaque modality attachment. Only the omni-conditioned source interprets it.
struct OmniPayload {
    std::string media_type;
    std::string bytes;
};

struct PromptInput {
    std::vector<TokenId> tokens;
    std::optional<OmniPayload> omni;
};

/// Backend half of a session; implemented by each source kind.
class SessionBackend {
public:
    virtual ~SessionBackend() = default;
    virtual LogitVector step(TokenId token) = 0;
    virtual void release() noexcept = 0;
};

/// Incremental decoding state bound to one source and one prompt. Single
/// writer: step() calls on one session must be sequential. Closing is
/// idempotent and also happens on destruction.
class Session {
public:
    Session(std::string source_id, std::size_t token_count, std::size_t vocab_size,
            std::size_t context_limit, std::unique_ptr<SessionBackend> backend);
    Session(Session&&) noexcept = default;
    Session& operator=(Session&& other) noexcept;
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;
    ~Session();

    LogitVector step(TokenId token);
    void close() noexcept;

    bool live() const noexcept { return backend_ != nullptr; }
    std::size_t token_count() const noexcept { return token_count_; }
    const std::string& source_id() const noexcept { return source_id_; }

private:
    std::string source_id_;
    std::size_t token_count_ = 0;
    std::size_t vocab_size_ = 0;
    std::size_t context_limit_ = 0;
    std::unique_ptr<SessionBackend> backend_;
};

struct Prefill {
    Session session;
    LogitVector logits;
};

/// Anything that produces next-token logits for a prefix. Implementations
/// must tolerate concurrent calls on distinct sessions. A source must outlive
/// the sessions it opened.
class LogitSource {
public:
    virtual ~LogitSource() = default;

    virtual std::string id() const = 0;
    virtual const Vocabulary& vocabulary() const = 0;
    /// Maximum number of tokens a session may hold.
    virtual std::size_t context_limit() const = 0;

    /// Validates the prompt and opens a session on it.
    Prefill prefill(const PromptInput& input);
    /// As above, and rejects a source whose vocabulary differs from the engine's.
    Prefill prefill(const PromptInput& input, const Vocabulary& engine_vocabulary);

protected:
    struct Opened {
        std::unique_ptr<SessionBackend> backend;
        LogitVector logits;
    };
    virtual Opened open(const PromptInput& input) = 0;
};

}  // namespace omniguide

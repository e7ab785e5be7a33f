#pragma once

#include "omniguide/logit_source.hpp"

#include <chrono>
#include <string>

namespace omniguide {

struct RemoteOptions {
    /// Attempts for idempotent-enough calls (info, open) when the connection fails.
    int max_attempts = 3;
    std::chrono::milliseconds backoff{50};
    std::chrono::seconds timeout{30};
};

/// Logit source behind the wire protocol. The constructor performs the
/// `info` handshake, so vocabulary and context limit are known up front.
/// Each session owns its own connection.
class RemoteSource final : public LogitSource {
public:
    explicit RemoteSource(std::string endpoint, RemoteOptions options = {});

    std::string id() const override { return id_; }
    const Vocabulary& vocabulary() const override { return vocab_; }
    std::size_t context_limit() const override { return context_limit_; }

    const std::string& endpoint() const noexcept { return endpoint_; }

    /// Live session count as reported by the server.
    std::size_t remote_live_sessions() const;

protected:
    Opened open(const PromptInput& input) override;

private:
    std::string endpoint_;
    RemoteOptions options_;
    std::string id_;
    Vocabulary vocab_;
    std::size_t context_limit_ = 0;
};

}  // namespace omniguide

#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <string_view>

namespace omniguide {

enum class Errc {
    invalid_input,
    dimension,
    precondition,
    capacity,
    range,
    lifecycle,
    incompatible,
    transport,
    protocol,
    validation,
    contract,
    io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Remote source could not be reached. Carries enough to decide on a retry.
class TransportError : public Error {
public:
    TransportError(std::string endpoint, int attempts, bool retryable,
                   std::chrono::milliseconds retry_after, const std::string& message)
        : Error(Errc::transport, message),
          endpoint_(std::move(endpoint)),
          attempts_(attempts),
          retryable_(retryable),
          retry_after_(retry_after) {}

    const std::string& endpoint() const noexcept { return endpoint_; }
    int attempts() const noexcept { return attempts_; }
    bool retryable() const noexcept { return retryable_; }
    std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

private:
    std::string endpoint_;
    int attempts_;
    bool retryable_;
    std::chrono::milliseconds retry_after_;
};

/// Server answered with a machine-readable error code.
class ProtocolError : public Error {
public:
    ProtocolError(Errc code, std::string remote_code, int http_status, const std::string& message)
        : Error(code, message), remote_code_(std::move(remote_code)), http_status_(http_status) {}

    const std::string& remote_code() const noexcept { return remote_code_; }
    int http_status() const noexcept { return http_status_; }

private:
    std::string remote_code_;
    int http_status_;
};

}  // namespace omniguide

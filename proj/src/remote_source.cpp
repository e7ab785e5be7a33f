#include "omniguide/remote_source.hpp"

#include "omniguide/wire.hpp"

#include <httplib.h>

#include <thread>

namespace omniguide {

namespace {

using nlohmann::json;

std::unique_ptr<httplib::Client> make_client(const std::string& endpoint, const RemoteOptions& options) {
    auto client = std::make_unique<httplib::Client>(endpoint);
    if (!client->is_valid()) {
        throw TransportError(endpoint, 0, false, std::chrono::milliseconds{0}, "invalid endpoint '" + endpoint + "'");
    }
    client->set_keep_alive(true);
    client->set_tcp_nodelay(true);
    client->set_connection_timeout(options.timeout);
    client->set_read_timeout(options.timeout);
    client->set_write_timeout(options.timeout);
    return client;
}

json parse_response(const std::string& endpoint, const httplib::Result& res) {
    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw Error(Errc::protocol, endpoint + ": unparseable response (" + e.what() + ")");
    }
    if (res->status / 100 != 2) {
        std::string code = "unknown";
        std::string message = res->body;
        if (body.is_object() && body.contains("error") && body["error"].is_object()) {
            code = body["error"].value("code", code);
            message = body["error"].value("message", message);
        }
        throw ProtocolError(wire::errc_for(code), code, res->status, endpoint + ": " + code + ": " + message);
    }
    wire::require_version(body);
    return body;
}

/// One request. Connection failures are retried up to `attempts` times.
json request(httplib::Client& client, const std::string& endpoint, const char* path, const json* body,
             int attempts, std::chrono::milliseconds backoff) {
    attempts = std::max(attempts, 1);
    for (int attempt = 1;; ++attempt) {
        httplib::Result res = body ? client.Post(path, body->dump(), "application/json") : client.Get(path);
        if (res) return parse_response(endpoint, res);
        if (attempt >= attempts) {
            throw TransportError(endpoint, attempt, true, backoff * 2,
                                 endpoint + path + ": " + httplib::to_string(res.error()) + " after " +
                                     std::to_string(attempt) + " attempt(s)");
        }
        std::this_thread::sleep_for(backoff * attempt);
    }
}

class RemoteSession final : public SessionBackend {
public:
    RemoteSession(std::unique_ptr<httplib::Client> client, std::string endpoint, std::string session_id)
        : client_(std::move(client)), endpoint_(std::move(endpoint)), session_id_(std::move(session_id)) {}

    LogitVector step(TokenId token) override {
        json body = wire::envelope();
        body["session_id"] = session_id_;
        body["token"] = token;
        const json reply = request(*client_, endpoint_, wire::kStepPath, &body, 1, std::chrono::milliseconds{0});
        return wire::logits_from_json(reply.at("logits"));
    }

    void release() noexcept override {
        try {
            json body = wire::envelope();
            body["session_id"] = session_id_;
            request(*client_, endpoint_, wire::kClosePath, &body, 1, std::chrono::milliseconds{0});
        } catch (...) {
            // the server drops the session on shutdown anyway
        }
        client_.reset();
    }

private:
    std::unique_ptr<httplib::Client> client_;
    std::string endpoint_;
    std::string session_id_;
};

}  // namespace

RemoteSource::RemoteSource(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    auto client = make_client(endpoint_, options_);
    const json info = request(*client, endpoint_, wire::kInfoPath, nullptr, options_.max_attempts, options_.backoff);
    try {
        vocab_.size = info.at("vocab_size").get<std::size_t>();
        vocab_.fingerprint = info.at("fingerprint").get<std::string>();
        if (info.contains("tokens")) vocab_.tokens = info["tokens"].get<std::vector<std::string>>();
        context_limit_ = info.at("context_limit").get<std::size_t>();
        id_ = info.value("model_id", std::string("remote")) + "@" + endpoint_;
    } catch (const json::exception& e) {
        throw Error(Errc::protocol, endpoint_ + ": malformed info response (" + e.what() + ")");
    }
    if (vocab_.size == 0) throw Error(Errc::protocol, endpoint_ + ": server reports an empty vocabulary");
}

std::size_t RemoteSource::remote_live_sessions() const {
    auto client = make_client(endpoint_, options_);
    const json stats = request(*client, endpoint_, wire::kStatsPath, nullptr, 1, std::chrono::milliseconds{0});
    return stats.at("live_sessions").get<std::size_t>();
}

LogitSource::Opened RemoteSource::open(const PromptInput& input) {
    auto client = make_client(endpoint_, options_);
    json body = wire::envelope();
    body["tokens"] = input.tokens;
    if (input.omni) body["omni_payload"] = wire::payload_to_json(*input.omni);
    const json reply = request(*client, endpoint_, wire::kOpenPath, &body, options_.max_attempts, options_.backoff);
    std::string session_id;
    LogitVector logits;
    try {
        session_id = reply.at("session_id").get<std::string>();
        logits = wire::logits_from_json(reply.at("logits"));
    } catch (const json::exception& e) {
        throw Error(Errc::protocol, endpoint_ + ": malformed open response (" + e.what() + ")");
    }
    return Opened{std::make_unique<RemoteSession>(std::move(client), endpoint_, std::move(session_id)),
                  std::move(logits)};
}

}  // namespace omniguide

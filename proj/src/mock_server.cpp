#include "omniguide/mock_server.hpp"

#include "omniguide/wire.hpp"

#include <httplib.h>

#include <cmath>

namespace omniguide {

namespace {

using nlohmann::json;

std::chrono::nanoseconds seconds_to_ns(double seconds) {
    return std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(seconds * 1e9)));
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    reply(res, status, wire::error_body(code, message));
}

/// Parses and version-checks a request body; writes the error reply on failure.
std::optional<json> read_body(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::parse_error& e) {
        reply_error(res, 400, wire::code::kBadRequest, e.what());
        return std::nullopt;
    }
    if (!body.is_object() || !body.contains("protocol_version")) {
        reply_error(res, 400, wire::code::kBadRequest, "missing protocol_version");
        return std::nullopt;
    }
    if (body["protocol_version"] != wire::kProtocolVersion) {
        reply_error(res, 400, wire::code::kUnsupportedVersion, "server speaks protocol_version 1");
        return std::nullopt;
    }
    return body;
}

}  // namespace

void LatencyModel::validate() const {
    if (!(per_token_prefill_s >= 0.0) || !(per_step_s >= 0.0) || !(omni_payload_factor_s_per_kb >= 0.0)) {
        throw Error(Errc::validation, "latency model entries must be non-negative");
    }
}

std::chrono::nanoseconds LatencyModel::prefill_cost(std::size_t prompt_tokens, std::size_t payload_bytes) const {
    return seconds_to_ns(per_token_prefill_s * static_cast<double>(prompt_tokens) +
                         omni_payload_factor_s_per_kb * static_cast<double>(payload_bytes) / 1024.0);
}

std::chrono::nanoseconds LatencyModel::step_cost() const { return seconds_to_ns(per_step_s); }

void SimulatedDevice::occupy(std::chrono::nanoseconds cost) {
    if (cost.count() <= 0) return;
    std::lock_guard lock(mutex_);
    std::this_thread::sleep_for(cost);
}

struct MockServer::HostedSession {
    std::mutex busy;
    std::vector<TokenId> prefix;
    std::optional<OmniPayload> omni;
};

MockServer::MockServer(std::shared_ptr<const ToyModel> model, LatencyModel latency,
                       std::shared_ptr<SimulatedDevice> device)
    : model_(std::move(model)),
      latency_(latency),
      device_(device ? std::move(device) : std::make_shared<SimulatedDevice>()),
      server_(std::make_unique<httplib::Server>()) {
    latency_.validate();
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_->set_keep_alive_timeout(1);
    server_->set_tcp_nodelay(true);
    install_routes();
}

MockServer::~MockServer() { stop(); }

int MockServer::bind(const std::string& host, int port) {
    host_ = host;
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
    return port_;
}

void MockServer::start() {
    if (port_ < 0) throw Error(Errc::precondition, "bind() before start()");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void MockServer::run() {
    if (port_ < 0) throw Error(Errc::precondition, "bind() before run()");
    server_->listen_after_bind();
}

void MockServer::stop() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(sessions_mutex_);
    closed_ += sessions_.size();
    sessions_.clear();
}

std::string MockServer::endpoint() const { return "http://" + host_ + ":" + std::to_string(port_); }

ServerStats MockServer::stats() const {
    std::lock_guard lock(sessions_mutex_);
    return ServerStats{sessions_.size(), opened_, closed_};
}

std::shared_ptr<MockServer::HostedSession> MockServer::find(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

void MockServer::install_routes() {
    server_->Get(wire::kInfoPath, [this](const httplib::Request&, httplib::Response& res) {
        const auto& vocab = model_->vocabulary();
        json body = wire::envelope();
        body["model_id"] = model_->id();
        body["vocab_size"] = vocab.size;
        body["fingerprint"] = vocab.fingerprint;
        body["context_limit"] = model_->context_limit();
        body["tokens"] = vocab.tokens;
        reply(res, 200, body);
    });

    server_->Get(wire::kStatsPath, [this](const httplib::Request&, httplib::Response& res) {
        const auto s = stats();
        json body = wire::envelope();
        body["live_sessions"] = s.live_sessions;
        body["opened"] = s.opened;
        body["closed"] = s.closed;
        reply(res, 200, body);
    });

    server_->Post(wire::kOpenPath, [this](const httplib::Request& req, httplib::Response& res) {
        auto body = read_body(req, res);
        if (!body) return;
        auto session = std::make_shared<HostedSession>();
        try {
            session->prefix = body->at("tokens").get<std::vector<TokenId>>();
            if (body->contains("omni_payload") && !(*body)["omni_payload"].is_null()) {
                session->omni = wire::payload_from_json((*body)["omni_payload"]);
            }
        } catch (const std::exception& e) {
            return reply_error(res, 400, wire::code::kBadRequest, e.what());
        }
        if (session->prefix.empty()) return reply_error(res, 400, wire::code::kEmptyPrompt, "empty prompt");
        for (TokenId t : session->prefix) {
            if (t >= model_->vocabulary().size) {
                return reply_error(res, 400, wire::code::kTokenOutOfRange, "token " + std::to_string(t));
            }
        }
        if (session->prefix.size() > model_->context_limit()) {
            return reply_error(res, 400, wire::code::kCapacityExceeded,
                               "context limit " + std::to_string(model_->context_limit()));
        }
        LogitVector logits = model_->evaluate(session->prefix, session->omni);
        const std::size_t payload_bytes = session->omni ? session->omni->bytes.size() : 0;
        device_->occupy(latency_.prefill_cost(session->prefix.size(), payload_bytes));

        const std::string id = "s" + std::to_string(next_id_.fetch_add(1));
        json out = wire::envelope();
        out["session_id"] = id;
        out["token_count"] = session->prefix.size();
        out["logits"] = logits;
        {
            std::lock_guard lock(sessions_mutex_);
            sessions_.emplace(id, std::move(session));
            ++opened_;
        }
        reply(res, 200, out);
    });

    server_->Post(wire::kStepPath, [this](const httplib::Request& req, httplib::Response& res) {
        auto body = read_body(req, res);
        if (!body) return;
        std::string id;
        TokenId token = 0;
        try {
            id = body->at("session_id").get<std::string>();
            token = body->at("token").get<TokenId>();
        } catch (const std::exception& e) {
            return reply_error(res, 400, wire::code::kBadRequest, e.what());
        }
        auto session = find(id);
        if (!session) return reply_error(res, 404, wire::code::kSessionNotFound, "no session '" + id + "'");
        std::unique_lock busy(session->busy, std::try_to_lock);
        if (!busy.owns_lock()) {
            return reply_error(res, 409, wire::code::kSessionConflict, "concurrent step on '" + id + "'");
        }
        if (token >= model_->vocabulary().size) {
            return reply_error(res, 400, wire::code::kTokenOutOfRange, "token " + std::to_string(token));
        }
        if (session->prefix.size() + 1 > model_->context_limit()) {
            return reply_error(res, 400, wire::code::kCapacityExceeded,
                               "context limit " + std::to_string(model_->context_limit()));
        }
        session->prefix.push_back(token);
        LogitVector logits = model_->evaluate(session->prefix, session->omni);
        device_->occupy(latency_.step_cost());

        json out = wire::envelope();
        out["session_id"] = id;
        out["token_count"] = session->prefix.size();
        out["logits"] = logits;
        reply(res, 200, out);
    });

    server_->Post(wire::kClosePath, [this](const httplib::Request& req, httplib::Response& res) {
        auto body = read_body(req, res);
        if (!body) return;
        std::string id;
        try {
            id = body->at("session_id").get<std::string>();
        } catch (const std::exception& e) {
            return reply_error(res, 400, wire::code::kBadRequest, e.what());
        }
        bool erased = false;
        {
            std::lock_guard lock(sessions_mutex_);
            erased = sessions_.erase(id) > 0;
            if (erased) ++closed_;
        }
        json out = wire::envelope();
        out["closed"] = erased;
        reply(res, 200, out);
    });
}

std::unique_ptr<MockServer> serve(ToySpec spec, LatencyModel latency, const std::string& host, int port,
                                  std::shared_ptr<SimulatedDevice> device) {
    auto model = build_toy_model(std::move(spec), "toy");
    auto server = std::make_unique<MockServer>(std::move(model), latency, std::move(device));
    server->bind(host, port);
    server->start();
    return server;
}

}  // namespace omniguide

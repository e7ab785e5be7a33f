#include "omniguide/wire.hpp"

#include <sodium.h>

namespace omniguide::wire {

namespace {

void ensure_sodium() {
    static const int ready = sodium_init();
    (void)ready;
}

}  // namespace

std::string encode_base64(std::string_view bytes) {
    ensure_sodium();
    const std::size_t cap = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    std::string out(cap, '\0');
    sodium_bin2base64(out.data(), cap, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                      sodium_base64_VARIANT_ORIGINAL);
    out.resize(cap - 1);  // drop the terminating NUL
    return out;
}

std::string decode_base64(std::string_view text) {
    ensure_sodium();
    std::string out(text.size() / 4 * 3 + 3, '\0');
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(),
                          nullptr, &len, &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw Error(Errc::protocol, "malformed base64 payload");
    }
    out.resize(len);
    return out;
}

nlohmann::json envelope() { return nlohmann::json{{"protocol_version", kProtocolVersion}}; }

nlohmann::json error_body(std::string_view code, std::string_view message) {
    auto body = envelope();
    body["error"] = {{"code", code}, {"message", message}};
    return body;
}

Errc errc_for(std::string_view remote_code) {
    if (remote_code == code::kSessionNotFound || remote_code == code::kSessionConflict) return Errc::lifecycle;
    if (remote_code == code::kEmptyPrompt) return Errc::precondition;
    if (remote_code == code::kTokenOutOfRange) return Errc::range;
    if (remote_code == code::kCapacityExceeded) return Errc::capacity;
    return Errc::protocol;
}

nlohmann::json payload_to_json(const OmniPayload& payload) {
    return {{"media_type", payload.media_type}, {"data_b64", encode_base64(payload.bytes)}};
}

OmniPayload payload_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("data_b64") || !j["data_b64"].is_string()) {
        throw Error(Errc::protocol, "omni_payload requires a data_b64 string");
    }
    OmniPayload payload;
    payload.media_type = j.value("media_type", std::string{});
    payload.bytes = decode_base64(j["data_b64"].get<std::string>());
    return payload;
}

LogitVector logits_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(Errc::protocol, "logits must be an array");
    LogitVector out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw Error(Errc::protocol, "logit entry is not a number");
        out.push_back(v.get<double>());
    }
    return out;
}

void require_version(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("protocol_version") || !body["protocol_version"].is_number_integer()) {
        throw Error(Errc::protocol, "message lacks protocol_version");
    }
    const int version = body["protocol_version"].get<int>();
    if (version != kProtocolVersion) {
        throw Error(Errc::protocol, "unsupported protocol_version " + std::to_string(version));
    }
}

}  // namespace omniguide::wire

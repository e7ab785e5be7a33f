#pragma once

// Logit-server wire protocol, version 1.
//
// HTTP/1.1, JSON bodies, every message carries "protocol_version".
//   GET  /v1/info            -> {vocab_size, fingerprint, context_limit, tokens?, model_id}
//   POST /v1/sessions/open   {tokens, omni_payload?: {media_type, data_b64}}
//                            -> {session_id, token_count, logits}
//   POST /v1/sessions/step   {session_id, token} -> {session_id, token_count, logits}
//   POST /v1/sessions/close  {session_id} -> {closed}
//   GET  /v1/stats           -> {live_sessions, opened, closed}
// Errors: non-2xx status with {"error": {"code", "message"}}.
// Logits are JSON numbers printed in shortest round-trip form, so they decode
// to the exact doubles the server computed.

#include "omniguide/error.hpp"
#include "omniguide/logit_source.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace omniguide::wire {

inline constexpr int kProtocolVersion = 1;

inline constexpr const char* kInfoPath = "/v1/info";
inline constexpr const char* kOpenPath = "/v1/sessions/open";
inline constexpr const char* kStepPath = "/v1/sessions/step";
inline constexpr const char* kClosePath = "/v1/sessions/close";
inline constexpr const char* kStatsPath = "/v1/stats";

namespace code {
inline constexpr const char* kBadRequest = "bad_request";
inline constexpr const char* kUnsupportedVersion = "unsupported_version";
inline constexpr const char* kSessionNotFound = "session_not_found";
inline constexpr const char* kSessionConflict = "session_conflict";
inline constexpr const char* kEmptyPrompt = "empty_prompt";
inline constexpr const char* kTokenOutOfRange = "token_out_of_range";
inline constexpr const char* kCapacityExceeded = "capacity_exceeded";
inline constexpr const char* kShuttingDown = "shutting_down";
}  // namespace code

std::string encode_base64(std::string_view bytes);
/// Throws Errc::protocol on malformed input.
std::string decode_base64(std::string_view text);

nlohmann::json envelope();
nlohmann::json error_body(std::string_view code, std::string_view message);

/// Engine-side error category for a remote error code.
Errc errc_for(std::string_view remote_code);

nlohmann::json payload_to_json(const OmniPayload& payload);
OmniPayload payload_from_json(const nlohmann::json& j);

LogitVector logits_from_json(const nlohmann::json& j);

/// Rejects bodies with a missing or different protocol_version.
void require_version(const nlohmann::json& body);

}  // namespace omniguide::wire

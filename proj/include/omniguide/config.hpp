#pragma once

#include "omniguide/decoder.hpp"
#include "omniguide/report.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace omniguide {

/// Where a branch's logits come from: a toy table file or a remote server.
struct SourceConfig {
    std::optional<std::string> toy_spec;
    std::optional<std::string> endpoint;
};

struct PromptConfig {
    std::optional<std::string> text;
    std::optional<std::vector<TokenId>> tokens;
    std::optional<std::string> omni_payload_path;
    std::optional<std::string> omni_payload_text;
    std::string omni_media_type = "application/octet-stream";
    /// "none": negative branch sees text only. "same": it also receives the payload.
    std::string negative_omni = "none";
};

struct EvalItem {
    std::string split = "default";
    PromptConfig prompt;
    std::string gold;
};

struct CaptionConfig {
    std::optional<std::string> prompt_text;
    std::size_t max_new_tokens = 256;
};

/// Declarative job description. Every default mirrors the reference decoding
/// setup, so an almost empty file reproduces it.
struct RunConfig {
    SourceConfig base;
    std::optional<SourceConfig> guide;
    std::optional<SourceConfig> negative;
    PromptConfig prompt;
    std::string think_tag = "<think>";
    std::vector<std::string> stop;
    std::size_t max_new_tokens = 4096;
    GuidanceConfig guidance;
    SamplerConfig sampler;
    CaptionConfig caption;
    std::vector<ChoiceOption> options;
    std::vector<EvalItem> items;
    std::optional<std::string> output_text;
    std::optional<std::string> output_trace;
};

/// Strict parse: unknown keys and wrong types throw Errc::validation.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Missing file throws Errc::io; malformed content Errc::validation.
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// OMNIGUIDE_BASE_ENDPOINT, OMNIGUIDE_GUIDE_ENDPOINT, OMNIGUIDE_SEED.
void apply_env_overrides(RunConfig& cfg);

/// Whitespace tokenizer for demo prompts; unknown words throw Errc::validation.
std::vector<TokenId> tokenize_whitespace(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

std::shared_ptr<LogitSource> open_source(const SourceConfig& cfg, const std::string& role);

struct Sources {
    std::shared_ptr<LogitSource> base;
    std::shared_ptr<LogitSource> guide;
    std::shared_ptr<LogitSource> negative;
};

Sources open_sources(const RunConfig& cfg);

PromptInput resolve_prompt(const PromptConfig& prompt, const Vocabulary& vocab);

/// Builds the decode job for the configured prompt (or an eval item's prompt).
DecodeJob make_job(const RunConfig& cfg, const Sources& sources, const PromptConfig& prompt);

}  // namespace omniguide

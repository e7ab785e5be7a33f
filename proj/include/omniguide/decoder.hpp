#pragma once

#include "omniguide/guidance.hpp"
#include "omniguide/logit_source.hpp"
#include "omniguide/sampler.hpp"
#include "omniguide/trace.hpp"

#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace omniguide {

struct DecodeJob {
    /// Omni-conditioned model; also serves the text-only negative branch.
    std::shared_ptr<LogitSource> base_source;
    /// Text-only reasoning guide.
    std::shared_ptr<LogitSource> guide_source;
    /// Optional separate negative model for fixed_contrast (an anti-expert).
    /// When absent the negative branch is the base model without modalities.
    std::shared_ptr<LogitSource> negative_source;

    PromptInput prompt;
    /// Payload for the negative branch. Absent in the modality-removal
    /// setting; set it to model distorted-input contrast.
    std::optional<OmniPayload> negative_payload;

    GuidanceConfig guidance;
    SamplerConfig sampler;
    std::size_t max_new_tokens = 4096;
    std::set<TokenId> stop_tokens;
    /// Appended to the guide branch prompt only.
    std::vector<TokenId> think_tag;
    /// Issue the per-step branch calls concurrently and join before fusing.
    bool parallel_branches = true;
};

/// context_limit: some branch's window is full before max_new_tokens.
enum class FinishReason { stop_token, length_limit, context_limit, error };

std::string_view to_string(FinishReason reason) noexcept;

struct BranchTiming {
    double prefill_s = 0.0;
    double generate_s = 0.0;  // cumulative over step calls
    std::size_t steps = 0;
};

struct DecodeResult {
    std::vector<TokenId> tokens;
    FinishReason finish = FinishReason::length_limit;
    std::string error_message;
    std::vector<StepTrace> traces;

    BranchTiming base;
    BranchTiming negative;
    BranchTiming guide;

    /// Job start to first fused token.
    double prefill_time_s = 0.0;
    /// First fused token to last fused token.
    double generate_time_s = 0.0;
    std::size_t generate_intervals = 0;

    /// Offset of the answer tokens (non-zero only for caption_then_answer).
    std::size_t answer_begin = 0;

    double mean_generate_s() const noexcept {
        return generate_intervals == 0 ? 0.0 : generate_time_s / static_cast<double>(generate_intervals);
    }
};

/// Precondition checks shared by decode and the CLI: strategy inputs present,
/// vocabularies compatible, prompt within every branch's context limit.
/// Throws Errc::precondition / incompatible / capacity / validation.
void validate_job(const DecodeJob& job);

/// Runs the fused autoregressive loop. Precondition failures throw; a branch
/// failure mid-run returns the partial result with FinishReason::error.
DecodeResult decode(const DecodeJob& job);

struct CaptionOptions {
    /// Stage-1 prompt sent with the payload. Empty means the job prompt tokens.
    std::vector<TokenId> caption_prompt;
    std::size_t caption_max_new_tokens = 256;
};

/// Two-stage baseline: the base model captions the payload, then the guide
/// answers from caption ++ question ++ think tag without seeing the payload.
DecodeResult caption_then_answer(const DecodeJob& job, const CaptionOptions& options = {});

struct BenchEntry {
    std::string label;
    DecodeJob job;
};

struct BenchRow {
    std::string label;
    Strategy strategy = Strategy::none;
    double mean_prefill_s = 0.0;
    double mean_generate_s = 0.0;
    double prefill_ratio = 1.0;
    double generate_ratio = 1.0;
};

/// Mean prefill and per-token generate latency of each entry over
/// `repetitions` runs, with ratios against the first strategy-none entry. If
/// no entry uses strategy none, a baseline row derived from the first job is
/// prepended.
std::vector<BenchRow> bench(std::span<const BenchEntry> entries, std::size_t repetitions);

}  // namespace omniguide

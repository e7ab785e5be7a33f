#include "omniguide/decoder.hpp"

#include "omniguide/error.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <future>

namespace omniguide {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

/// One logit stream: a source, the prompt it sees and its live session.
struct Branch {
    LogitSource* source = nullptr;
    PromptInput prompt;
    BranchTiming* timing = nullptr;
    double* trace_latency_ms = nullptr;
    std::optional<Session> session;
    LogitVector logits;

    void advance(const Vocabulary& vocab, std::optional<TokenId> token) {
        const auto start = Clock::now();
        if (!session) {
            Prefill opened = source->prefill(prompt, vocab);
            session.emplace(std::move(opened.session));
            logits = std::move(opened.logits);
        } else {
            logits = session->step(*token);
        }
        const double elapsed = seconds_between(start, Clock::now());
        *trace_latency_ms = elapsed * 1e3;
        if (token) {
            timing->generate_s += elapsed;
            ++timing->steps;
        } else {
            timing->prefill_s = elapsed;
        }
    }
};

/// Advances every branch on the same token and joins before returning. The
/// first failure is rethrown after all calls have finished.
void advance_all(std::vector<Branch*>& branches, const Vocabulary& vocab, std::optional<TokenId> token,
                 bool parallel) {
    if (!parallel || branches.size() == 1) {
        for (Branch* b : branches) b->advance(vocab, token);
        return;
    }
    std::vector<std::future<void>> pending;
    pending.reserve(branches.size() - 1);
    for (std::size_t i = 1; i < branches.size(); ++i) {
        pending.push_back(std::async(std::launch::async, [&, i] { branches[i]->advance(vocab, token); }));
    }
    std::exception_ptr failure;
    try {
        branches.front()->advance(vocab, token);
    } catch (...) {
        failure = std::current_exception();
    }
    for (auto& f : pending) {
        try {
            f.get();
        } catch (...) {
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

void require_in_vocab(std::span<const TokenId> tokens, std::size_t vocab_size, const char* what) {
    for (TokenId t : tokens) {
        if (t >= vocab_size) {
            throw Error(Errc::range, std::string(what) + " token id " + std::to_string(t) +
                                         " outside vocabulary of size " + std::to_string(vocab_size));
        }
    }
}

void require_compatible(const LogitSource& a, const LogitSource& b) {
    const auto report = check_compatibility(a.vocabulary(), b.vocabulary());
    if (!report.ok()) {
        throw Error(Errc::incompatible,
                    "sources '" + a.id() + "' and '" + b.id() + "' have incompatible vocabularies: " +
                        report.describe());
    }
}

void require_context(const LogitSource& source, std::size_t prompt_len) {
    if (prompt_len > source.context_limit()) {
        throw Error(Errc::capacity, "prompt of " + std::to_string(prompt_len) + " tokens exceeds context limit " +
                                        std::to_string(source.context_limit()) + " of source '" + source.id() +
                                        "'");
    }
}

LogitSource& negative_source_of(const DecodeJob& job) {
    if (job.guidance.strategy == Strategy::fixed_contrast && job.negative_source) return *job.negative_source;
    return *job.base_source;
}

}  // namespace

std::string_view to_string(FinishReason reason) noexcept {
    switch (reason) {
    case FinishReason::stop_token: return "stop_token";
    case FinishReason::length_limit: return "length_limit";
    case FinishReason::context_limit: return "context_limit";
    case FinishReason::error: return "error";
    }
    return "unknown";
}

void validate_job(const DecodeJob& job) {
    if (!job.base_source) throw Error(Errc::precondition, "decode job has no base source");
    if (job.max_new_tokens < 1) throw Error(Errc::validation, "max_new_tokens must be >= 1");
    job.guidance.validate();
    job.sampler.validate();
    if (job.prompt.tokens.empty()) throw Error(Errc::precondition, "prompt token sequence is empty");

    const Strategy strategy = job.guidance.strategy;
    const std::size_t vocab_size = job.base_source->vocabulary().size;
    require_in_vocab(job.prompt.tokens, vocab_size, "prompt");
    require_in_vocab(job.think_tag, vocab_size, "think tag");
    require_context(*job.base_source, job.prompt.tokens.size());

    if (needs_guide(strategy)) {
        if (!job.guide_source) {
            throw Error(Errc::precondition,
                        "strategy '" + std::string(to_string(strategy)) + "' requires a guide source");
        }
        require_compatible(*job.base_source, *job.guide_source);
        require_context(*job.guide_source, job.prompt.tokens.size() + job.think_tag.size());
    }
    if (strategy == Strategy::fixed_contrast && job.negative_source) {
        require_compatible(*job.base_source, *job.negative_source);
        require_context(*job.negative_source, job.prompt.tokens.size());
    }
}

DecodeResult decode(const DecodeJob& job) {
    validate_job(job);
    const auto start = Clock::now();
    const Strategy strategy = job.guidance.strategy;
    const Vocabulary& vocab = job.base_source->vocabulary();

    DecodeResult result;
    StepTrace pending;  // latencies land here before the token is known

    Branch base{job.base_source.get(), job.prompt, &result.base, &pending.lat_base_ms, {}, {}};

    Branch negative{&negative_source_of(job), PromptInput{job.prompt.tokens, std::nullopt}, &result.negative,
                    &pending.lat_neg_ms, {}, {}};
    if (negative.source == job.base_source.get()) negative.prompt.omni = job.negative_payload;

    Branch guide{job.guide_source.get(), PromptInput{job.prompt.tokens, std::nullopt}, &result.guide,
                 &pending.lat_guide_ms, {}, {}};
    guide.prompt.tokens.insert(guide.prompt.tokens.end(), job.think_tag.begin(), job.think_tag.end());

    std::vector<Branch*> active{&base};
    if (needs_negative(strategy)) active.push_back(&negative);
    if (needs_guide(strategy)) active.push_back(&guide);

    std::vector<TokenId> history;
    if (job.sampler.penalize_prompt) history = job.prompt.tokens;
    Rng rng(job.sampler.seed);

    result.finish = FinishReason::length_limit;
    Clock::time_point first_token;
    try {
        std::optional<TokenId> last;
        for (std::size_t t = 1; t <= job.max_new_tokens; ++t) {
            pending = StepTrace{};
            advance_all(active, vocab, last, job.parallel_branches);

            FusedStep fused = fuse(job.guidance, BranchLogits{base.logits, negative.logits, guide.logits}, t);
            const TokenId token = sample_token(fused.logits, job.sampler, history, rng);

            const auto now = Clock::now();
            if (t == 1) {
                first_token = now;
                result.prefill_time_s = seconds_between(start, now);
            } else {
                result.generate_time_s = seconds_between(first_token, now);
                result.generate_intervals = t - 1;
            }

            pending.t = t;
            pending.token_id = token;
            if (vocab.has_strings()) pending.token = vocab.tokens[token];
            pending.alpha_r = fused.weights.alpha_r;
            pending.alpha_p = fused.weights.alpha_p;
            pending.d_r = fused.weights.d_r;
            pending.d_p = fused.weights.d_p;
            result.traces.push_back(pending);
            result.tokens.push_back(token);
            history.push_back(token);
            last = token;

            if (job.stop_tokens.contains(token)) {
                result.finish = FinishReason::stop_token;
                break;
            }
            const bool window_full = std::any_of(active.begin(), active.end(), [](const Branch* b) {
                return b->session->token_count() + 1 > b->source->context_limit();
            });
            if (window_full && t < job.max_new_tokens) {
                result.finish = FinishReason::context_limit;
                break;
            }
        }
    } catch (const std::exception& e) {
        result.finish = FinishReason::error;
        result.error_message = e.what();
    }
    for (Branch* b : active) {
        if (b->session) b->session->close();
    }
    return result;
}

DecodeResult caption_then_answer(const DecodeJob& job, const CaptionOptions& options) {
    if (!job.base_source) throw Error(Errc::precondition, "caption pipeline needs a base source");
    if (!job.guide_source) throw Error(Errc::precondition, "caption pipeline needs a guide source");
    require_compatible(*job.base_source, *job.guide_source);

    DecodeJob caption = job;
    caption.guidance.strategy = Strategy::none;
    caption.guide_source.reset();
    caption.negative_source.reset();
    caption.think_tag.clear();
    caption.max_new_tokens = options.caption_max_new_tokens;
    if (!options.caption_prompt.empty()) caption.prompt.tokens = options.caption_prompt;

    DecodeResult first = decode(caption);
    for (auto& tr : first.traces) tr.stage = 1;
    if (first.finish == FinishReason::error) return first;

    std::vector<TokenId> caption_tokens = first.tokens;
    if (!caption_tokens.empty() && job.stop_tokens.contains(caption_tokens.back())) caption_tokens.pop_back();

    DecodeJob answer = job;
    answer.base_source = job.guide_source;
    answer.guide_source.reset();
    answer.negative_source.reset();
    answer.guidance.strategy = Strategy::none;
    answer.think_tag.clear();
    answer.prompt.omni.reset();
    answer.prompt.tokens = caption_tokens;
    answer.prompt.tokens.insert(answer.prompt.tokens.end(), job.prompt.tokens.begin(), job.prompt.tokens.end());
    answer.prompt.tokens.insert(answer.prompt.tokens.end(), job.think_tag.begin(), job.think_tag.end());

    DecodeResult second = decode(answer);

    DecodeResult out = std::move(first);
    out.answer_begin = out.tokens.size();
    out.tokens.insert(out.tokens.end(), second.tokens.begin(), second.tokens.end());
    for (auto tr : second.traces) {
        tr.stage = 2;
        tr.lat_guide_ms = tr.lat_base_ms;
        tr.lat_base_ms = 0.0;
        out.traces.push_back(std::move(tr));
    }
    out.guide = second.base;
    out.finish = second.finish;
    out.error_message = second.error_message;
    out.generate_time_s += second.prefill_time_s + second.generate_time_s;
    out.generate_intervals = out.tokens.empty() ? 0 : out.tokens.size() - 1;
    return out;
}

std::vector<BenchRow> bench(std::span<const BenchEntry> entries, std::size_t repetitions) {
    if (repetitions < 1) throw Error(Errc::precondition, "bench needs at least one repetition");
    if (entries.empty()) throw Error(Errc::precondition, "bench needs at least one job");

    std::vector<BenchEntry> plan(entries.begin(), entries.end());
    std::size_t baseline = plan.size();
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (plan[i].job.guidance.strategy == Strategy::none) {
            baseline = i;
            break;
        }
    }
    if (baseline == plan.size()) {
        BenchEntry base{"none (baseline)", plan.front().job};
        base.job.guidance.strategy = Strategy::none;
        plan.insert(plan.begin(), std::move(base));
        baseline = 0;
    }

    std::vector<BenchRow> rows;
    for (const auto& entry : plan) {
        BenchRow row;
        row.label = entry.label;
        row.strategy = entry.job.guidance.strategy;
        for (std::size_t r = 0; r < repetitions; ++r) {
            const DecodeResult res = decode(entry.job);
            if (res.finish == FinishReason::error) {
                throw Error(Errc::transport, "bench job '" + entry.label + "' failed: " + res.error_message);
            }
            row.mean_prefill_s += res.prefill_time_s;
            row.mean_generate_s += res.mean_generate_s();
        }
        row.mean_prefill_s /= static_cast<double>(repetitions);
        row.mean_generate_s /= static_cast<double>(repetitions);
        rows.push_back(std::move(row));
    }
    const BenchRow& base = rows[baseline];
    for (auto& row : rows) {
        row.prefill_ratio = base.mean_prefill_s > 0.0 ? row.mean_prefill_s / base.mean_prefill_s : 1.0;
        row.generate_ratio = base.mean_generate_s > 0.0 ? row.mean_generate_s / base.mean_generate_s : 1.0;
    }
    return rows;
}

}  // namespace omniguide

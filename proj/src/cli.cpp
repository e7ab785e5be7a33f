#include "omniguide/cli.hpp"

#include "omniguide/config.hpp"
#include "omniguide/error.hpp"
#include "omniguide/mock_server.hpp"
#include "omniguide/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace omniguide::cli {

namespace {

std::atomic<bool> g_shutdown{false};

extern "C" void on_signal(int) { g_shutdown.store(true); }

/// Flag overrides applied on top of the config file and environment.
struct Overrides {
    std::optional<std::string> strategy;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<double> temperature;
    std::optional<double> top_p;
    std::optional<double> repetition_penalty;
    std::optional<std::size_t> max_new_tokens;
    std::optional<std::size_t> warmup_steps;
    std::optional<double> warmup_slope;
    std::optional<std::string> trace_out;
    std::optional<std::string> mode;

    void attach(CLI::App& app) {
        app.add_option("--strategy", strategy, "Guidance strategy");
        app.add_option("--alpha", alpha, "Fixed guidance weight");
        app.add_option("--seed", seed, "Sampler seed");
        app.add_option("--temperature", temperature);
        app.add_option("--top-p", top_p);
        app.add_option("--repetition-penalty", repetition_penalty);
        app.add_option("--max-new-tokens", max_new_tokens);
        app.add_option("--warmup-steps", warmup_steps);
        app.add_option("--warmup-slope", warmup_slope);
        app.add_option("--mode", mode, "sample or greedy");
        app.add_option("--trace-out", trace_out, "Trace output path (prefix for compare)");
    }

    void apply(RunConfig& cfg) const {
        if (strategy) {
            const auto s = parse_strategy(*strategy);
            if (!s) throw Error(Errc::validation, "unknown strategy '" + *strategy + "'");
            cfg.guidance.strategy = *s;
        }
        if (alpha) cfg.guidance.alpha = *alpha;
        if (seed) cfg.sampler.seed = *seed;
        if (temperature) cfg.sampler.temperature = *temperature;
        if (top_p) cfg.sampler.top_p = *top_p;
        if (repetition_penalty) cfg.sampler.repetition_penalty = *repetition_penalty;
        if (max_new_tokens) cfg.max_new_tokens = *max_new_tokens;
        if (warmup_steps) cfg.guidance.warmup_steps = *warmup_steps;
        if (warmup_slope) cfg.guidance.warmup_slope = *warmup_slope;
        if (mode) {
            if (*mode != "sample" && *mode != "greedy") throw Error(Errc::validation, "mode must be sample or greedy");
            cfg.sampler.mode = *mode == "greedy" ? SamplingMode::greedy : SamplingMode::sample;
        }
        if (trace_out) cfg.output_trace = *trace_out;
        if (cfg.max_new_tokens < 1) throw Error(Errc::validation, "max_new_tokens must be >= 1");
        cfg.guidance.validate();
        cfg.sampler.validate();
    }
};

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case Errc::incompatible:
    case Errc::transport:
    case Errc::protocol:
        return kHandshake;
    case Errc::lifecycle:
    case Errc::dimension:
        return kRuntime;
    default:
        return kConfig;
    }
}

/// Loads config + env + flags. Returns nullopt (and prints) when the file is missing.
std::optional<RunConfig> effective_config(const std::string& path, const Overrides& overrides, std::ostream& err) {
    if (!std::filesystem::exists(path)) {
        err << "error: config file '" << path << "' does not exist\n";
        return std::nullopt;
    }
    RunConfig cfg = load_run_config(path);
    apply_env_overrides(cfg);
    overrides.apply(cfg);
    return cfg;
}

std::string fixed(double v, int digits = 6) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::vector<TokenId> strip_stops(std::span<const TokenId> tokens, const DecodeJob& job) {
    std::vector<TokenId> out;
    for (TokenId t : tokens) {
        if (!job.stop_tokens.contains(t)) out.push_back(t);
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << text << '\n';
}

TraceHeader header_for(const RunConfig& cfg, std::string label = {}) {
    return TraceHeader{to_json(cfg), cfg.sampler.seed, std::string(to_string(cfg.guidance.strategy)),
                       std::move(label)};
}

// ---- decode ----------------------------------------------------------------

int cmd_decode(const std::string& config_path, const Overrides& overrides, std::ostream& out, std::ostream& err) {
    auto cfg = effective_config(config_path, overrides, err);
    if (!cfg) return kUsage;
    const Sources sources = open_sources(*cfg);
    const DecodeJob job = make_job(*cfg, sources, cfg->prompt);
    validate_job(job);
    const DecodeResult result = decode(job);

    const auto& vocab = sources.base->vocabulary();
    const std::string text = detokenize(strip_stops(result.tokens, job), vocab);
    if (cfg->output_text) write_text(*cfg->output_text, text);
    out << text << '\n';
    if (cfg->output_trace) emit_traces(result, header_for(*cfg), std::filesystem::path(*cfg->output_trace));

    if (result.finish == FinishReason::error) {
        err << "error: decode aborted: " << result.error_message << '\n';
        return kRuntime;
    }
    return kOk;
}

// ---- compare ---------------------------------------------------------------

struct StrategyChoice {
    std::string label;
    bool caption_pipeline = false;
    GuidanceConfig guidance;
};

StrategyChoice parse_choice(const std::string& spec, const GuidanceConfig& defaults) {
    StrategyChoice c{spec, false, defaults};
    std::string name = spec;
    std::optional<double> alpha;
    if (const auto colon = spec.find(':'); colon != std::string::npos) {
        name = spec.substr(0, colon);
        try {
            std::size_t used = 0;
            alpha = std::stod(spec.substr(colon + 1), &used);
            if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error(Errc::validation, "bad alpha in strategy '" + spec + "'");
        }
    }
    if (name == "caption_then_answer") {
        c.caption_pipeline = true;
        c.guidance.strategy = Strategy::none;
    } else {
        const auto s = parse_strategy(name);
        if (!s) throw Error(Errc::validation, "unknown strategy '" + name + "'");
        c.guidance.strategy = *s;
    }
    if (alpha) c.guidance.alpha = *alpha;
    c.guidance.validate();
    return c;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') c = '_';
    }
    return s;
}

DecodeResult run_choice(const StrategyChoice& choice, const RunConfig& cfg, const Sources& sources, DecodeJob job) {
    job.guidance = choice.guidance;
    if (!choice.caption_pipeline) {
        validate_job(job);
        return decode(job);
    }
    CaptionOptions options;
    options.caption_max_new_tokens = cfg.caption.max_new_tokens;
    if (cfg.caption.prompt_text) options.caption_prompt = tokenize_whitespace(*cfg.caption.prompt_text, sources.base->vocabulary());
    return caption_then_answer(job, options);
}

int cmd_compare(const std::string& config_path, const std::string& strategies, const Overrides& overrides,
                std::ostream& out, std::ostream& err) {
    auto cfg = effective_config(config_path, overrides, err);
    if (!cfg) return kUsage;
    std::vector<StrategyChoice> choices;
    for (const auto& s : split_list(strategies)) choices.push_back(parse_choice(s, cfg->guidance));
    if (choices.empty()) throw Error(Errc::validation, "no strategies given");

    const Sources sources = open_sources(*cfg);
    const auto& vocab = sources.base->vocabulary();

    std::vector<PromptConfig> prompts;
    if (cfg->items.empty()) prompts.push_back(cfg->prompt);
    for (const auto& item : cfg->items) prompts.push_back(item.prompt);

    struct Row {
        std::string label;
        std::vector<std::vector<TokenId>> outputs;
        std::vector<std::string> texts;
        std::optional<double> accuracy;
        double prefill_s = 0.0;
        double generate_s = 0.0;
        std::size_t tokens = 0;
        bool failed = false;
    };
    std::vector<Row> rows;

    for (const auto& choice : choices) {
        Row row;
        row.label = choice.label;
        std::vector<GradedItem> graded;
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            DecodeJob job = make_job(*cfg, sources, prompts[i]);
            RunConfig echoed = *cfg;
            echoed.guidance = choice.guidance;
            const DecodeResult res = run_choice(choice, *cfg, sources, job);
            row.failed |= res.finish == FinishReason::error;
            row.prefill_s += res.prefill_time_s;
            row.generate_s += res.mean_generate_s();
            row.tokens += res.tokens.size();
            row.outputs.push_back(res.tokens);
            const auto answer = std::span<const TokenId>(res.tokens).subspan(res.answer_begin);
            const std::string text = detokenize(strip_stops(answer, job), vocab);
            row.texts.push_back(text);
            if (!cfg->items.empty()) {
                graded.push_back(GradedItem{cfg->items[i].split, extract_choice(text, cfg->options), cfg->items[i].gold});
            }
            if (cfg->output_trace) {
                std::string path = *cfg->output_trace + "." + sanitize(choice.label);
                if (prompts.size() > 1) path += "." + std::to_string(i);
                emit_traces(res, header_for(echoed, choice.label), std::filesystem::path(path + ".jsonl"));
            }
        }
        row.prefill_s /= static_cast<double>(prompts.size());
        row.generate_s /= static_cast<double>(prompts.size());
        if (!graded.empty()) {
            std::size_t correct = 0;
            for (const auto& split : tabulate(graded)) correct += split.correct;
            row.accuracy = static_cast<double>(correct) / static_cast<double>(graded.size());
        }
        rows.push_back(std::move(row));
    }

    out << std::left << std::setw(24) << "strategy" << std::setw(10) << "accuracy" << std::setw(12) << "prefill_s"
        << std::setw(12) << "gen_s/tok" << std::setw(8) << "tokens"
        << "same_output_as\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::string same = "-";
        for (std::size_t prev = 0; prev < r; ++prev) {
            if (rows[prev].outputs == row.outputs) {
                same = "= " + rows[prev].label;
                break;
            }
        }
        out << std::left << std::setw(24) << row.label << std::setw(10)
            << (row.accuracy ? fixed(*row.accuracy, 3) : std::string("-")) << std::setw(12) << fixed(row.prefill_s)
            << std::setw(12) << fixed(row.generate_s) << std::setw(8) << row.tokens << same << '\n';
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.texts.size(); ++i) {
            out << "[" << row.label << (row.texts.size() > 1 ? "#" + std::to_string(i) : "") << "] " << row.texts[i]
                << '\n';
        }
    }
    for (const auto& row : rows) {
        if (row.failed) {
            err << "error: strategy '" << row.label << "' aborted\n";
            return kRuntime;
        }
    }
    return kOk;
}

// ---- bench -----------------------------------------------------------------

int cmd_bench(const std::string& config_path, std::size_t reps, const std::string& strategies,
              const Overrides& overrides, std::ostream& out, std::ostream& err) {
    auto cfg = effective_config(config_path, overrides, err);
    if (!cfg) return kUsage;
    if (reps < 1) throw Error(Errc::validation, "--reps must be >= 1");
    std::vector<std::string> names = split_list(strategies);
    if (names.empty()) names = {"none", std::string(to_string(cfg->guidance.strategy))};

    const Sources sources = open_sources(*cfg);
    const DecodeJob job = make_job(*cfg, sources, cfg->prompt);
    std::vector<BenchEntry> entries;
    for (const auto& name : names) {
        const StrategyChoice choice = parse_choice(name, cfg->guidance);
        if (choice.caption_pipeline) throw Error(Errc::validation, "bench does not support caption_then_answer");
        BenchEntry entry{choice.label, job};
        entry.job.guidance = choice.guidance;
        validate_job(entry.job);
        entries.push_back(std::move(entry));
    }
    const auto rows = bench(entries, reps);
    out << std::left << std::setw(24) << "strategy" << std::setw(14) << "prefill_s" << std::setw(14) << "gen_s/tok"
        << std::setw(10) << "prefill_x"
        << "generate_x\n";
    for (const auto& row : rows) {
        out << std::left << std::setw(24) << row.label << std::setw(14) << fixed(row.mean_prefill_s) << std::setw(14)
            << fixed(row.mean_generate_s) << std::setw(10) << (fixed(row.prefill_ratio, 2) + "x")
            << fixed(row.generate_ratio, 2) << "x\n";
    }
    return kOk;
}

// ---- render ----------------------------------------------------------------

int cmd_render(const std::string& trace_path, const std::string& format, std::size_t bins,
               const std::optional<std::string>& out_path, std::ostream& out, std::ostream& err) {
    const TraceFile file = read_traces(std::filesystem::path(trace_path));
    std::string text;
    if (format == "histogram") {
        const auto counts = alpha_histogram(file.traces, bins);
        std::ostringstream s;
        s << "bin_lo,bin_hi,count\n";
        for (std::size_t i = 0; i < counts.size(); ++i) {
            s << fixed(static_cast<double>(i) / bins, 4) << ',' << fixed(static_cast<double>(i + 1) / bins, 4) << ','
              << counts[i] << '\n';
        }
        text = s.str();
    } else {
        const Rendered r =
            render_attribution(file.traces, format == "markup" ? RenderFormat::markup : RenderFormat::terminal);
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        text = r.text;
    }
    if (out_path) {
        std::ofstream f(*out_path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(Errc::io, "cannot write " + *out_path);
        f << text;
    } else {
        out << text;
    }
    return kOk;
}

// ---- serve -----------------------------------------------------------------

int cmd_serve(const std::string& spec_path, const std::string& host, int port, const LatencyModel& latency,
              std::ostream& out, std::ostream& err) {
    auto model = build_toy_model(load_toy_spec(spec_path), std::filesystem::path(spec_path).stem().string());
    latency.validate();
    MockServer server(model, latency);
    try {
        server.bind(host, port);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }

    g_shutdown.store(false);
    auto old_int = std::signal(SIGINT, on_signal);
    auto old_term = std::signal(SIGTERM, on_signal);
    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (!g_shutdown.load() && !done.load()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
        server.stop();
    });
    out << "listening on " << server.endpoint() << std::endl;
    server.run();
    done.store(true);
    watcher.join();
    std::signal(SIGINT, old_int);
    std::signal(SIGTERM, old_term);
    const auto stats = server.stats();
    out << "drained; sessions opened " << stats.opened << ", closed " << stats.closed << std::endl;
    return kOk;
}

}  // namespace

void request_shutdown() noexcept { g_shutdown.store(true); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Guidance decoding engine: fuse omni, text-only and reasoning-guide logits"};
    app.require_subcommand(1);

    Overrides overrides;
    std::string config_path;
    std::string strategies;
    std::size_t reps = 1;

    auto* decode_cmd = app.add_subcommand("decode", "Run one decode job");
    decode_cmd->add_option("--config", config_path, "Job description (JSON)")->required();
    overrides.attach(*decode_cmd);

    auto* compare_cmd = app.add_subcommand("compare", "Run several strategies on identical jobs");
    compare_cmd->add_option("--config", config_path)->required();
    compare_cmd->add_option("--strategies", strategies, "Comma list, name or name:alpha")->required();
    overrides.attach(*compare_cmd);

    auto* bench_cmd = app.add_subcommand("bench", "Prefill / generate latency against strategy none");
    bench_cmd->add_option("--config", config_path)->required();
    bench_cmd->add_option("--reps", reps, "Repetitions per strategy");
    bench_cmd->add_option("--strategies", strategies, "Comma list (default: none + config strategy)");
    overrides.attach(*bench_cmd);

    std::string trace_path;
    std::string format = "terminal";
    std::size_t bins = 10;
    std::optional<std::string> render_out;
    auto* render_cmd = app.add_subcommand("render", "Render a trace file");
    render_cmd->add_option("trace", trace_path)->required();
    render_cmd->add_option("--format", format)->check(CLI::IsMember({"terminal", "markup", "histogram"}));
    render_cmd->add_option("--bins", bins)->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
    render_cmd->add_option("--out", render_out);

    std::string spec_path;
    std::string host = "127.0.0.1";
    int port = 8080;
    double prefill_ms = 0.0;
    double step_ms = 0.0;
    double omni_ms_per_kb = 0.0;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a toy model over the wire protocol");
    serve_cmd->add_option("--spec", spec_path, "Toy model spec")->required();
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port, "0 picks a free port");
    serve_cmd->add_option("--prefill-ms-per-token", prefill_ms);
    serve_cmd->add_option("--step-ms", step_ms);
    serve_cmd->add_option("--omni-ms-per-kb", omni_ms_per_kb);

    std::vector<std::string> argv_tail(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*decode_cmd) return cmd_decode(config_path, overrides, out, err);
        if (*compare_cmd) return cmd_compare(config_path, strategies, overrides, out, err);
        if (*bench_cmd) return cmd_bench(config_path, reps, strategies, overrides, out, err);
        if (*render_cmd) return cmd_render(trace_path, format, bins, render_out, out, err);
        if (*serve_cmd) {
            const LatencyModel latency{prefill_ms / 1e3, step_ms / 1e3, omni_ms_per_kb / 1e3};
            return cmd_serve(spec_path, host, port, latency, out, err);
        }
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}

}  // namespace omniguide::cli

#include "omniguide/config.hpp"

#include "omniguide/error.hpp"
#include "omniguide/remote_source.hpp"
#include "omniguide/toy_model.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace omniguide {

using nlohmann::json;

namespace {

/// Reads keys off one JSON object and rejects whatever it did not consume.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("must be an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(std::string("bad value for '") + key + "'");
        }
    }

    template <class T>
    void read(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(std::string("bad value for '") + key + "'");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.contains(key)) fail("unknown key '" + key + "'");
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(Errc::validation, "config " + where_ + ": " + what);
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return path.lexically_normal().string();
}

SourceConfig parse_source(const json& j, const std::string& where, const std::filesystem::path& dir) {
    Section s(j, where);
    SourceConfig src;
    s.read("toy_spec", src.toy_spec);
    s.read("endpoint", src.endpoint);
    s.finish();
    if (src.toy_spec.has_value() == src.endpoint.has_value()) s.fail("exactly one of toy_spec, endpoint");
    if (src.toy_spec) src.toy_spec = resolve_path(*src.toy_spec, dir);
    return src;
}

PromptConfig parse_prompt(const json& j, const std::string& where, const std::filesystem::path& dir) {
    Section s(j, where);
    PromptConfig p;
    s.read("text", p.text);
    s.read("tokens", p.tokens);
    s.read("omni_payload_path", p.omni_payload_path);
    s.read("omni_payload_text", p.omni_payload_text);
    s.read("omni_media_type", p.omni_media_type);
    s.read("negative_omni", p.negative_omni);
    s.finish();
    if (p.text.has_value() == p.tokens.has_value()) s.fail("exactly one of text, tokens");
    if (p.omni_payload_path && p.omni_payload_text) s.fail("at most one of omni_payload_path, omni_payload_text");
    if (p.negative_omni != "none" && p.negative_omni != "same") s.fail("negative_omni must be 'none' or 'same'");
    if (p.omni_payload_path) p.omni_payload_path = resolve_path(*p.omni_payload_path, dir);
    return p;
}

json to_json(const SourceConfig& s) {
    json j = json::object();
    if (s.toy_spec) j["toy_spec"] = *s.toy_spec;
    if (s.endpoint) j["endpoint"] = *s.endpoint;
    return j;
}

json to_json(const PromptConfig& p) {
    json j = json::object();
    if (p.text) j["text"] = *p.text;
    if (p.tokens) j["tokens"] = *p.tokens;
    if (p.omni_payload_path) j["omni_payload_path"] = *p.omni_payload_path;
    if (p.omni_payload_text) j["omni_payload_text"] = *p.omni_payload_text;
    j["omni_media_type"] = p.omni_media_type;
    j["negative_omni"] = p.negative_omni;
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::filesystem::path& dir) {
    RunConfig cfg;
    Section top(j, "root");

    const json* base = top.child("base");
    if (!base) top.fail("missing 'base' source");
    cfg.base = parse_source(*base, "base", dir);
    if (const json* g = top.child("guide")) cfg.guide = parse_source(*g, "guide", dir);
    if (const json* n = top.child("negative")) cfg.negative = parse_source(*n, "negative", dir);

    const json* prompt = top.child("prompt");
    if (!prompt) top.fail("missing 'prompt'");
    cfg.prompt = parse_prompt(*prompt, "prompt", dir);

    top.read("think_tag", cfg.think_tag);
    top.read("stop", cfg.stop);
    top.read("max_new_tokens", cfg.max_new_tokens);

    if (const json* g = top.child("guidance")) {
        Section s(*g, "guidance");
        std::string strategy(to_string(cfg.guidance.strategy));
        s.read("strategy", strategy);
        const auto parsed = parse_strategy(strategy);
        if (!parsed) s.fail("unknown strategy '" + strategy + "'");
        cfg.guidance.strategy = *parsed;
        s.read("alpha", cfg.guidance.alpha);
        s.read("warmup_steps", cfg.guidance.warmup_steps);
        s.read("warmup_slope", cfg.guidance.warmup_slope);
        s.read("clip_lo", cfg.guidance.clip_lo);
        s.read("clip_hi", cfg.guidance.clip_hi);
        s.finish();
    }
    if (const json* smp = top.child("sampler")) {
        Section s(*smp, "sampler");
        s.read("temperature", cfg.sampler.temperature);
        s.read("top_p", cfg.sampler.top_p);
        s.read("repetition_penalty", cfg.sampler.repetition_penalty);
        std::string mode = cfg.sampler.mode == SamplingMode::greedy ? "greedy" : "sample";
        s.read("mode", mode);
        if (mode != "greedy" && mode != "sample") s.fail("mode must be 'sample' or 'greedy'");
        cfg.sampler.mode = mode == "greedy" ? SamplingMode::greedy : SamplingMode::sample;
        s.read("seed", cfg.sampler.seed);
        s.read("penalize_prompt", cfg.sampler.penalize_prompt);
        s.finish();
    }
    if (const json* c = top.child("caption")) {
        Section s(*c, "caption");
        s.read("prompt_text", cfg.caption.prompt_text);
        s.read("max_new_tokens", cfg.caption.max_new_tokens);
        s.finish();
    }
    if (const json* e = top.child("eval")) {
        Section s(*e, "eval");
        if (const json* opts = s.child("options")) {
            if (!opts->is_array()) s.fail("options must be an array");
            for (const auto& o : *opts) {
                Section os(o, "eval.options[]");
                ChoiceOption opt;
                os.read("label", opt.label);
                os.read("text", opt.text);
                os.finish();
                cfg.options.push_back(std::move(opt));
            }
        }
        if (const json* items = s.child("items")) {
            if (!items->is_array()) s.fail("items must be an array");
            for (const auto& it : *items) {
                Section is(it, "eval.items[]");
                EvalItem item;
                is.read("split", item.split);
                is.read("gold", item.gold);
                const json* p = is.child("prompt");
                if (!p) is.fail("missing 'prompt'");
                item.prompt = parse_prompt(*p, "eval.items[].prompt", dir);
                is.finish();
                cfg.items.push_back(std::move(item));
            }
        }
        s.finish();
        if (!cfg.items.empty() && cfg.options.empty()) s.fail("items require options");
    }
    if (const json* o = top.child("output")) {
        Section s(*o, "output");
        s.read("text", cfg.output_text);
        s.read("trace", cfg.output_trace);
        s.finish();
        if (cfg.output_text) cfg.output_text = resolve_path(*cfg.output_text, dir);
        if (cfg.output_trace) cfg.output_trace = resolve_path(*cfg.output_trace, dir);
    }
    top.finish();

    if (cfg.max_new_tokens < 1) throw Error(Errc::validation, "config: max_new_tokens must be >= 1");
    cfg.guidance.validate();
    cfg.sampler.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::validation, "config " + path.string() + ": " + e.what());
    }
    return parse_run_config(j, std::filesystem::absolute(path).parent_path());
}

json to_json(const RunConfig& cfg) {
    json j;
    j["base"] = to_json(cfg.base);
    if (cfg.guide) j["guide"] = to_json(*cfg.guide);
    if (cfg.negative) j["negative"] = to_json(*cfg.negative);
    j["prompt"] = to_json(cfg.prompt);
    j["think_tag"] = cfg.think_tag;
    j["stop"] = cfg.stop;
    j["max_new_tokens"] = cfg.max_new_tokens;
    j["guidance"] = {
        {"strategy", to_string(cfg.guidance.strategy)}, {"alpha", cfg.guidance.alpha},
        {"warmup_steps", cfg.guidance.warmup_steps},    {"warmup_slope", cfg.guidance.warmup_slope},
        {"clip_lo", cfg.guidance.clip_lo},              {"clip_hi", cfg.guidance.clip_hi},
    };
    j["sampler"] = {
        {"temperature", cfg.sampler.temperature},
        {"top_p", cfg.sampler.top_p},
        {"repetition_penalty", cfg.sampler.repetition_penalty},
        {"mode", cfg.sampler.mode == SamplingMode::greedy ? "greedy" : "sample"},
        {"seed", cfg.sampler.seed},
        {"penalize_prompt", cfg.sampler.penalize_prompt},
    };
    json caption = {{"max_new_tokens", cfg.caption.max_new_tokens}};
    if (cfg.caption.prompt_text) caption["prompt_text"] = *cfg.caption.prompt_text;
    j["caption"] = caption;
    if (!cfg.options.empty() || !cfg.items.empty()) {
        json opts = json::array();
        for (const auto& o : cfg.options) opts.push_back({{"label", o.label}, {"text", o.text}});
        json items = json::array();
        for (const auto& it : cfg.items) {
            items.push_back({{"split", it.split}, {"gold", it.gold}, {"prompt", to_json(it.prompt)}});
        }
        j["eval"] = {{"options", opts}, {"items", items}};
    }
    json out = json::object();
    if (cfg.output_text) out["text"] = *cfg.output_text;
    if (cfg.output_trace) out["trace"] = *cfg.output_trace;
    j["output"] = out;
    return j;
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* v = std::getenv("OMNIGUIDE_BASE_ENDPOINT"); v && *v) cfg.base = SourceConfig{std::nullopt, v};
    if (const char* v = std::getenv("OMNIGUIDE_GUIDE_ENDPOINT"); v && *v) cfg.guide = SourceConfig{std::nullopt, v};
    if (const char* v = std::getenv("OMNIGUIDE_SEED"); v && *v) {
        std::uint64_t seed = 0;
        const std::string_view s(v);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw Error(Errc::validation, "OMNIGUIDE_SEED is not an unsigned integer: '" + std::string(s) + "'");
        }
        cfg.sampler.seed = seed;
    }
}

std::vector<TokenId> tokenize_whitespace(std::string_view text, const Vocabulary& vocab) {
    if (!vocab.has_strings()) throw Error(Errc::validation, "vocabulary has no token strings; give prompt tokens");
    std::vector<TokenId> ids;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        const auto id = vocab.find(word);
        if (!id) throw Error(Errc::validation, "word '" + word + "' is not in the vocabulary");
        ids.push_back(*id);
    }
    return ids;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
    std::string out;
    for (TokenId t : tokens) {
        if (!out.empty()) out += ' ';
        out += vocab.has_strings() && t < vocab.size ? vocab.tokens[t] : "<" + std::to_string(t) + ">";
    }
    return out;
}

std::shared_ptr<LogitSource> open_source(const SourceConfig& cfg, const std::string& role) {
    if (cfg.toy_spec) {
        return build_toy_model(load_toy_spec(*cfg.toy_spec), role + ":" + std::filesystem::path(*cfg.toy_spec).stem().string());
    }
    return std::make_shared<RemoteSource>(*cfg.endpoint);
}

Sources open_sources(const RunConfig& cfg) {
    Sources s;
    s.base = open_source(cfg.base, "base");
    if (cfg.guide) s.guide = open_source(*cfg.guide, "guide");
    if (cfg.negative) s.negative = open_source(*cfg.negative, "negative");
    return s;
}

PromptInput resolve_prompt(const PromptConfig& prompt, const Vocabulary& vocab) {
    PromptInput input;
    input.tokens = prompt.tokens ? *prompt.tokens : tokenize_whitespace(*prompt.text, vocab);
    if (prompt.omni_payload_path) {
        input.omni = OmniPayload{prompt.omni_media_type, read_file(*prompt.omni_payload_path)};
    } else if (prompt.omni_payload_text) {
        input.omni = OmniPayload{prompt.omni_media_type, *prompt.omni_payload_text};
    }
    return input;
}

DecodeJob make_job(const RunConfig& cfg, const Sources& sources, const PromptConfig& prompt) {
    const Vocabulary& vocab = sources.base->vocabulary();
    DecodeJob job;
    job.base_source = sources.base;
    job.guide_source = sources.guide;
    job.negative_source = sources.negative;
    job.prompt = resolve_prompt(prompt, vocab);
    if (prompt.negative_omni == "same") job.negative_payload = job.prompt.omni;
    job.guidance = cfg.guidance;
    job.sampler = cfg.sampler;
    job.max_new_tokens = cfg.max_new_tokens;
    for (const auto& s : cfg.stop) {
        const auto id = vocab.find(s);
        if (!id) throw Error(Errc::validation, "stop token '" + s + "' is not in the vocabulary");
        job.stop_tokens.insert(*id);
    }
    if (sources.guide && !cfg.think_tag.empty()) job.think_tag = tokenize_whitespace(cfg.think_tag, vocab);
    return job;
}

}  // namespace omniguide

#include "omniguide/report.hpp"

#include "omniguide/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

namespace omniguide {

using nlohmann::json;

std::string config_fingerprint(const json& config) {
    if (!config.is_object() || !config.contains("output")) return fingerprint_tokens({config.dump()});
    json copy = config;
    copy.erase("output");
    return fingerprint_tokens({copy.dump()});
}

json trace_to_json(const StepTrace& tr) {
    json j = {
        {"t", tr.t},
        {"token_id", tr.token_id},
        {"token", tr.token},
        {"alpha_r", tr.alpha_r},
        {"alpha_p", tr.alpha_p},
        {"d_r", tr.d_r},
        {"d_p", tr.d_p},
        {"lat_base_ms", tr.lat_base_ms},
        {"lat_neg_ms", tr.lat_neg_ms},
        {"lat_guide_ms", tr.lat_guide_ms},
    };
    if (tr.stage != 0) j["stage"] = tr.stage;
    return j;
}

StepTrace trace_from_json(const json& j) {
    StepTrace tr;
    try {
        tr.t = j.at("t").get<std::size_t>();
        tr.token_id = j.at("token_id").get<TokenId>();
        tr.token = j.value("token", std::string{});
        tr.alpha_r = j.at("alpha_r").get<double>();
        tr.alpha_p = j.at("alpha_p").get<double>();
        tr.d_r = j.at("d_r").get<double>();
        tr.d_p = j.at("d_p").get<double>();
        tr.lat_base_ms = j.at("lat_base_ms").get<double>();
        tr.lat_neg_ms = j.at("lat_neg_ms").get<double>();
        tr.lat_guide_ms = j.at("lat_guide_ms").get<double>();
        tr.stage = j.value("stage", 0);
    } catch (const json::exception& e) {
        throw Error(Errc::validation, std::string("malformed trace record: ") + e.what());
    }
    return tr;
}

void emit_traces(const DecodeResult& result, const TraceHeader& header, std::ostream& out) {
    json h = {
        {"format", "omniguide-trace"},
        {"version", 1},
        {"config_fingerprint", config_fingerprint(header.config)},
        {"divergence_log_base", kDivergenceLogBase},
        {"seed", header.seed},
        {"strategy", header.strategy},
        {"finish_reason", to_string(result.finish)},
        {"tokens", result.tokens.size()},
        {"prefill_time_s", result.prefill_time_s},
        {"mean_generate_s", result.mean_generate_s()},
        {"config", header.config},
    };
    if (!header.label.empty()) h["label"] = header.label;
    if (!result.error_message.empty()) h["error"] = result.error_message;
    out << json{{"header", h}}.dump() << '\n';
    for (const auto& tr : result.traces) out << trace_to_json(tr).dump() << '\n';
}

void emit_traces(const DecodeResult& result, const TraceHeader& header, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open trace file " + path.string() + " for writing");
    emit_traces(result, header, out);
    out.flush();
    if (!out) throw Error(Errc::io, "failed writing trace file " + path.string());
}

TraceFile read_traces(std::istream& in) {
    TraceFile file;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(Errc::validation, std::string("malformed trace line: ") + e.what());
        }
        if (first) {
            if (!j.contains("header")) throw Error(Errc::validation, "trace file lacks a header record");
            file.header = j["header"];
            first = false;
            continue;
        }
        file.traces.push_back(trace_from_json(j));
    }
    if (first) throw Error(Errc::validation, "empty trace file");
    return file;
}

TraceFile read_traces(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read trace file " + path.string());
    return read_traces(in);
}

int intensity_bucket(double alpha_r, int levels) {
    if (!(alpha_r > 0.0)) return 0;
    const int bucket = static_cast<int>(std::floor(alpha_r * levels));
    return std::clamp(bucket, 0, levels - 1);
}

namespace {

// light to dark
constexpr int kTerminalBackground[kIntensityLevels] = {255, 153, 75, 25};
constexpr const char* kMarkupBackground[kIntensityLevels] = {"#f5f7fb", "#bcd4f6", "#5b9be6", "#1c4f9c"};

std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

Rendered render_attribution(std::span<const StepTrace> traces, RenderFormat format) {
    Rendered out;
    bool missing = false;
    std::ostringstream body;
    if (format == RenderFormat::markup) {
        body << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>alpha_r attribution</title>\n<style>\n"
             << "body{font-family:sans-serif;margin:2em;line-height:2}\n"
             << "span.tok{padding:2px 3px;border-radius:3px}\n";
        for (int i = 0; i < kIntensityLevels; ++i) {
            body << ".a" << i << "{background:" << kMarkupBackground[i] << ";color:" << (i >= 2 ? "#fff" : "#111")
                 << "}\n";
        }
        body << "</style></head><body>\n<p class=\"legend\">";
        for (int i = 0; i < kIntensityLevels; ++i) {
            body << "<span class=\"tok a" << i << "\">alpha_r &ge; " << static_cast<double>(i) / kIntensityLevels
                 << "</span> ";
        }
        body << "</p>\n<p class=\"trace\">";
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& tr = traces[i];
        const int bucket = intensity_bucket(tr.alpha_r);
        out.buckets.push_back(bucket);
        std::string token = tr.token;
        if (token.empty()) {
            missing = true;
            token = "<" + std::to_string(tr.token_id) + ">";
        }
        if (format == RenderFormat::terminal) {
            if (i) body << ' ';
            body << "\x1b[48;5;" << kTerminalBackground[bucket] << (bucket >= 2 ? ";97m" : ";30m") << token
                 << "\x1b[0m";
        } else {
            body << "<span class=\"tok a" << bucket << "\" title=\"t=" << tr.t << " alpha_r=" << tr.alpha_r
                 << "\">" << html_escape(token) << "</span> ";
        }
    }
    if (format == RenderFormat::markup) body << "</p>\n</body></html>\n";
    else body << '\n';
    if (missing) out.warnings.push_back("trace has no token strings; rendering token ids");
    out.text = body.str();
    return out;
}

std::vector<std::size_t> alpha_histogram(std::span<const StepTrace> traces, std::size_t bins) {
    if (bins < 1) throw Error(Errc::precondition, "histogram needs at least one bin");
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& tr : traces) {
        const double a = std::isfinite(tr.alpha_r) ? std::clamp(tr.alpha_r, 0.0, 1.0) : 0.0;
        auto idx = static_cast<std::size_t>(std::floor(a * static_cast<double>(bins)));
        counts[std::min(idx, bins - 1)] += 1;
    }
    return counts;
}

namespace {

std::string regex_escape(std::string_view s) {
    static const std::string special = R"(\^$.|?*+()[]{}/-)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_wrapper(unsigned char c) { return std::ispunct(c) != 0; }

}  // namespace

std::optional<std::string> extract_choice(std::string_view response, std::span<const ChoiceOption> options) {
    if (options.empty()) throw Error(Errc::precondition, "extract_choice needs at least one option");
    std::set<std::string> labels;
    for (const auto& o : options) {
        if (o.label.empty() || !labels.insert(o.label).second) {
            throw Error(Errc::precondition, "option labels must be non-empty and distinct");
        }
    }
    const std::string text(response);

    // 1. explicit marker, last occurrence wins
    std::string alternation;
    for (const auto& o : options) {
        if (!alternation.empty()) alternation += '|';
        alternation += regex_escape(o.label);
    }
    const std::regex marker("[Aa]nswer(?:\\s+is)?\\s*[:=]?\\s*[\\(\\[\\*]*\\s*(" + alternation +
                            ")(?![A-Za-z0-9])");
    std::optional<std::string> found;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), marker); it != std::sregex_iterator(); ++it) {
        found = (*it)[1].str();
    }
    if (found) return found;

    // 2. final standalone label
    std::string last_word;
    {
        std::istringstream words(text);
        std::string w;
        while (words >> w) last_word = w;
    }
    while (!last_word.empty() && is_wrapper(static_cast<unsigned char>(last_word.back()))) last_word.pop_back();
    std::size_t lead = 0;
    while (lead < last_word.size() && is_wrapper(static_cast<unsigned char>(last_word[lead]))) ++lead;
    last_word.erase(0, lead);
    if (labels.contains(last_word)) return last_word;

    // 3. option text occurring uniquely
    const std::string lowered = lowercase(text);
    std::optional<std::string> hit;
    std::size_t hits = 0;
    for (const auto& o : options) {
        if (o.text.empty()) continue;
        if (lowered.find(lowercase(o.text)) != std::string::npos) {
            hit = o.label;
            ++hits;
        }
    }
    if (hits == 1) return hit;
    return std::nullopt;
}

std::vector<SplitAccuracy> tabulate(std::span<const GradedItem> items) {
    std::vector<SplitAccuracy> out;
    for (const auto& item : items) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.split == item.split; });
        if (it == out.end()) {
            out.push_back(SplitAccuracy{item.split});
            it = std::prev(out.end());
        }
        ++it->total;
        if (item.predicted && *item.predicted == item.gold) ++it->correct;
    }
    return out;
}

}  // namespace omniguide

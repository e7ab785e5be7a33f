#pragma once

#include "omniguide/decoder.hpp"
#include "omniguide/trace.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace omniguide {

// ---- trace files ---------------------------------------------------------
//
// Line-delimited JSON. Line 1 is {"header": {...}}; every following line is
// one StepTrace with the fields t, token_id, token, alpha_r, alpha_p, d_r,
// d_p, lat_base_ms, lat_neg_ms, lat_guide_ms (plus "stage" inside the
// caption pipeline).

struct TraceHeader {
    nlohmann::json config = nlohmann::json::object();  // effective run config
    std::uint64_t seed = 0;
    std::string strategy;
    std::string label;  // free-form, e.g. the compare row name
};

inline constexpr const char* kDivergenceLogBase = "e";

/// Hash of the canonical dump. A top-level "output" object is left out, so
/// runs that differ only in where they write share a fingerprint.
std::string config_fingerprint(const nlohmann::json& config);

nlohmann::json trace_to_json(const StepTrace& trace);
StepTrace trace_from_json(const nlohmann::json& j);

void emit_traces(const DecodeResult& result, const TraceHeader& header, std::ostream& out);
/// Throws Errc::io naming the path.
void emit_traces(const DecodeResult& result, const TraceHeader& header, const std::filesystem::path& path);

struct TraceFile {
    nlohmann::json header;
    std::vector<StepTrace> traces;
};

TraceFile read_traces(std::istream& in);
TraceFile read_traces(const std::filesystem::path& path);

// ---- attribution rendering -----------------------------------------------

inline constexpr int kIntensityLevels = 4;

/// Uniform buckets over [0, 1]; 1.0 lands in the darkest bucket.
int intensity_bucket(double alpha_r, int levels = kIntensityLevels);

enum class RenderFormat { terminal, markup };

struct Rendered {
    std::string text;
    std::vector<int> buckets;
    std::vector<std::string> warnings;
};

/// Shades each token by its alpha_r. Traces without token strings render as
/// <id> and add a warning.
Rendered render_attribution(std::span<const StepTrace> traces, RenderFormat format);

/// Counts of alpha_r over `bins` uniform bins on [0, 1]. Values outside the
/// interval are clamped into the end bins; 1.0 falls in the last bin.
std::vector<std::size_t> alpha_histogram(std::span<const StepTrace> traces, std::size_t bins);

// ---- answer extraction ---------------------------------------------------

struct ChoiceOption {
    std::string label;
    std::string text;
};

/// Template matching in priority order:
///   1. the last explicit marker ("Answer: X", "the answer is X");
///   2. a label standing alone as the final word ("... so C.");
///   3. the option whose text, and only that option's, occurs in the response.
/// Returns nullopt when nothing matches. Throws Errc::precondition only for an
/// empty option set or duplicate labels.
std::optional<std::string> extract_choice(std::string_view response, std::span<const ChoiceOption> options);

struct GradedItem {
    std::string split;
    std::optional<std::string> predicted;
    std::string gold;
};

struct SplitAccuracy {
    std::string split;
    std::size_t correct = 0;
    std::size_t total = 0;

    double accuracy() const noexcept {
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    }
};

/// Accuracy per split in order of first appearance; a missing prediction counts as wrong.
std::vector<SplitAccuracy> tabulate(std::span<const GradedItem> items);

}  // namespace omniguide

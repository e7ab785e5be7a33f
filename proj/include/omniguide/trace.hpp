#pragma once

#include "omniguide/logit_source.hpp"

#include <cstddef>
#include <string>

namespace omniguide {

/// Per-token record. Latencies are the wall-clock cost of the branch call
/// that produced the logits for this token (prefill for t = 1).
struct StepTrace {
    std::size_t t = 0;
    TokenId token_id = 0;
    std::string token;  // empty when the vocabulary has no strings
    double alpha_r = 0.0;
    double alpha_p = 0.0;
    double d_r = 0.0;
    double d_p = 0.0;
    double lat_base_ms = 0.0;
    double lat_neg_ms = 0.0;
    double lat_guide_ms = 0.0;
    /// 0 for a single-stage decode; 1 caption, 2 answer in the caption pipeline.
    int stage = 0;
};

}  // namespace omniguide

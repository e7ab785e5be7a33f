#pragma once

#include "omniguide/logit_source.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace omniguide {

struct ToyRule {
    std::vector<TokenId> context;
    TokenId next = 0;
    double score = 0.0;
};

/// Weighted n-gram table. For a prefix, the group of rules whose context is
/// the longest suffix of the prefix supplies the scores; every other token
/// scores zero. When a payload is attached, the rows registered under its key
/// are looked up the same way and override the base scores token by token.
struct ToySpec {
    std::vector<std::string> vocab;
    std::size_t context_limit = 8192;
    std::vector<ToyRule> rules;
    std::map<std::string, std::vector<ToyRule>> omni;
};

/// Line format:
///   @vocab tok tok ...          (may repeat; appends)
///   @context_limit N
///   @omni <key>                 (following rows condition on payload key)
///   @base                       (back to unconditioned rows)
///   ctx tokens | next | score   (empty ctx = fallback row)
/// `#` starts a comment.
ToySpec parse_toy_spec(std::string_view text);
ToySpec load_toy_spec(const std::filesystem::path& path);

/// Payload key a toy model reads: the payload bytes with surrounding whitespace trimmed.
std::string payload_key(const OmniPayload& payload);

class ToyModel final : public LogitSource {
public:
    ToyModel(ToySpec spec, std::string id);

    std::string id() const override { return id_; }
    const Vocabulary& vocabulary() const override { return vocab_; }
    std::size_t context_limit() const override { return context_limit_; }

    /// Direct table evaluation; what prefill and step must agree with.
    LogitVector evaluate(std::span<const TokenId> prefix, const std::optional<OmniPayload>& omni) const;

protected:
    Opened open(const PromptInput& input) override;

private:
    using Table = std::map<std::vector<TokenId>, std::vector<std::pair<TokenId, double>>>;
    static Table index(const std::vector<ToyRule>& rules, std::size_t vocab_size, const std::string& where);
    static const Table::mapped_type* longest_match(const Table& table, std::size_t max_context,
                                                   std::span<const TokenId> prefix);

    std::string id_;
    Vocabulary vocab_;
    std::size_t context_limit_;
    Table base_;
    std::size_t base_max_context_ = 0;
    std::map<std::string, std::pair<Table, std::size_t>> omni_;
};

/// Validates the spec and builds a shareable source.
std::shared_ptr<ToyModel> build_toy_model(ToySpec spec, std::string id = "toy");

}  // namespace omniguide

#include "omniguide/toy_model.hpp"

#include "omniguide/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace omniguide {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw Error(Errc::validation, "toy spec line " + std::to_string(line) + ": " + what);
}

class ToySession final : public SessionBackend {
public:
    ToySession(const ToyModel& model, PromptInput input)
        : model_(model), prefix_(std::move(input.tokens)), omni_(std::move(input.omni)) {}

    LogitVector step(TokenId token) override {
        prefix_.push_back(token);
        return model_.evaluate(prefix_, omni_);
    }

    void release() noexcept override { prefix_.clear(); }

private:
    const ToyModel& model_;
    std::vector<TokenId> prefix_;
    std::optional<OmniPayload> omni_;
};

}  // namespace

ToySpec parse_toy_spec(std::string_view text) {
    ToySpec spec;
    std::unordered_map<std::string, TokenId> ids;
    std::vector<ToyRule>* rows = &spec.rules;

    auto lookup = [&](const std::string& tok, std::size_t line) {
        auto it = ids.find(tok);
        if (it == ids.end()) fail(line, "token '" + tok + "' is not in the vocabulary");
        return it->second;
    };

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '@') {
            auto words = split_words(line);
            const std::string& directive = words.front();
            if (directive == "@vocab") {
                for (std::size_t i = 1; i < words.size(); ++i) {
                    if (words[i].find('|') != std::string::npos) fail(line_no, "token may not contain '|'");
                    if (!ids.emplace(words[i], static_cast<TokenId>(spec.vocab.size())).second) {
                        fail(line_no, "duplicate vocabulary token '" + words[i] + "'");
                    }
                    spec.vocab.push_back(words[i]);
                }
            } else if (directive == "@context_limit") {
                if (words.size() != 2) fail(line_no, "@context_limit takes one value");
                std::size_t limit = 0;
                const auto& w = words[1];
                auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), limit);
                if (ec != std::errc{} || ptr != w.data() + w.size() || limit == 0) {
                    fail(line_no, "bad context limit '" + w + "'");
                }
                spec.context_limit = limit;
            } else if (directive == "@omni") {
                if (words.size() != 2) fail(line_no, "@omni takes exactly one key");
                rows = &spec.omni[words[1]];
            } else if (directive == "@base") {
                rows = &spec.rules;
            } else {
                fail(line_no, "unknown directive '" + directive + "'");
            }
            continue;
        }

        const auto bar1 = line.find('|');
        const auto bar2 = bar1 == std::string_view::npos ? bar1 : line.find('|', bar1 + 1);
        if (bar2 == std::string_view::npos || line.find('|', bar2 + 1) != std::string_view::npos) {
            fail(line_no, "expected 'context | next | score'");
        }
        ToyRule rule;
        for (const auto& tok : split_words(line.substr(0, bar1))) rule.context.push_back(lookup(tok, line_no));
        const auto next = split_words(line.substr(bar1 + 1, bar2 - bar1 - 1));
        if (next.size() != 1) fail(line_no, "exactly one next token required");
        rule.next = lookup(next.front(), line_no);
        const auto score = trim(line.substr(bar2 + 1));
        auto [ptr, ec] = std::from_chars(score.data(), score.data() + score.size(), rule.score);
        if (ec != std::errc{} || ptr != score.data() + score.size() || !std::isfinite(rule.score)) {
            fail(line_no, "bad score '" + std::string(score) + "'");
        }
        rows->push_back(std::move(rule));
    }
    if (spec.vocab.empty()) throw Error(Errc::validation, "toy spec declares no @vocab");
    return spec;
}

ToySpec load_toy_spec(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read toy spec " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_toy_spec(buf.str());
}

std::string payload_key(const OmniPayload& payload) { return std::string(trim(payload.bytes)); }

ToyModel::Table ToyModel::index(const std::vector<ToyRule>& rules, std::size_t vocab_size,
                                const std::string& where) {
    Table table;
    for (const auto& rule : rules) {
        for (TokenId t : rule.context) {
            if (t >= vocab_size) throw Error(Errc::validation, where + ": context token id out of vocabulary");
        }
        if (rule.next >= vocab_size) throw Error(Errc::validation, where + ": next token id out of vocabulary");
        if (!std::isfinite(rule.score)) throw Error(Errc::validation, where + ": non-finite score");
        auto& row = table[rule.context];
        for (const auto& [tok, _] : row) {
            if (tok == rule.next) throw Error(Errc::validation, where + ": duplicate rule");
        }
        row.emplace_back(rule.next, rule.score);
    }
    return table;
}

ToyModel::ToyModel(ToySpec spec, std::string id)
    : id_(std::move(id)), vocab_(Vocabulary::from_tokens(spec.vocab)), context_limit_(spec.context_limit) {
    if (context_limit_ == 0) throw Error(Errc::validation, "context limit must be positive");
    base_ = index(spec.rules, vocab_.size, "base rules");
    for (const auto& [ctx, _] : base_) base_max_context_ = std::max(base_max_context_, ctx.size());
    for (const auto& [key, rules] : spec.omni) {
        auto table = index(rules, vocab_.size, "@omni " + key);
        std::size_t longest = 0;
        for (const auto& [ctx, _] : table) longest = std::max(longest, ctx.size());
        omni_.emplace(key, std::make_pair(std::move(table), longest));
    }
}

const ToyModel::Table::mapped_type* ToyModel::longest_match(const Table& table, std::size_t max_context,
                                                            std::span<const TokenId> prefix) {
    const std::size_t upto = std::min(max_context, prefix.size());
    std::vector<TokenId> key;
    for (std::size_t n = upto + 1; n-- > 0;) {
        key.assign(prefix.end() - static_cast<std::ptrdiff_t>(n), prefix.end());
        if (auto it = table.find(key); it != table.end()) return &it->second;
    }
    return nullptr;
}

LogitVector ToyModel::evaluate(std::span<const TokenId> prefix, const std::optional<OmniPayload>& omni) const {
    LogitVector logits(vocab_.size, 0.0);
    if (const auto* row = longest_match(base_, base_max_context_, prefix)) {
        for (const auto& [tok, score] : *row) logits[tok] = score;
    }
    if (omni) {
        if (auto it = omni_.find(payload_key(*omni)); it != omni_.end()) {
            if (const auto* row = longest_match(it->second.first, it->second.second, prefix)) {
                for (const auto& [tok, score] : *row) logits[tok] = score;
            }
        }
    }
    return logits;
}

LogitSource::Opened ToyModel::open(const PromptInput& input) {
    LogitVector logits = evaluate(input.tokens, input.omni);
    return Opened{std::make_unique<ToySession>(*this, input), std::move(logits)};
}

std::shared_ptr<ToyModel> build_toy_model(ToySpec spec, std::string id) {
    return std::make_shared<ToyModel>(std::move(spec), std::move(id));
}

}  // namespace omniguide

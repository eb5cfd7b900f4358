#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "iwsi/records.hpp"
#include "iwsi/rng.hpp"
#include "iwsi/tokenizer.hpp"

namespace iwsi {

// Order-n n-gram model with additive smoothing and fractional counts.
//
// Scoring uses the exact (n-1)-token context and additive-alpha smoothing
// over the vocabulary; a token outside the vocabulary scores like an unseen
// vocabulary member. Sampling is restricted to observed continuations
// (counts raised to 1/T); an unseen context falls back to the start-of-text
// context, then to a uniform draw over the vocabulary, so a model trained on
// a single text reproduces that text verbatim.
class ToyLanguageModel {
public:
    // context key (joined tokens) -> token -> count
    using Counts = std::map<std::string, std::map<std::string, double>>;

    ToyLanguageModel(int order, double alpha, TokenizerMode mode = TokenizerMode::word);

    // Direct construction for hand-built models; vocabulary is used as given.
    static ToyLanguageModel from_counts(int order, double alpha, std::set<std::string> vocabulary,
                                        Counts counts, TokenizerMode mode = TokenizerMode::word);

    int order() const { return order_; }
    double alpha() const { return alpha_; }
    TokenizerMode tokenizer() const { return mode_; }
    const std::set<std::string>& vocabulary() const { return vocab_; }
    const Counts& counts() const { return counts_; }

    // Smoothed conditional probability for the exact context (the last
    // order-1 tokens of `context`).
    double prob(const std::vector<std::string>& context, const std::string& token) const;
    double prob_for_key(const std::string& context_key, const std::string& token) const;

    // Mean per-token negative log-likelihood (nats) of target_text given
    // context_text; only target tokens are scored. Throws TokenizationError
    // when the target tokenizes to nothing.
    double sequence_nll(const std::string& context_text, const std::string& target_text) const;

    // Greedy when temperature == 0 (ties resolve to the lexicographically
    // first token). The first sampled token never terminates the completion.
    std::string complete(const std::string& prompt, double temperature, Rng& rng,
                         int max_tokens) const;

    // Adds weight * (n-gram counts of text), appending an end marker so
    // generation learns to stop. weight == 0 inserts nothing.
    void accumulate(const std::string& text, double weight = 1.0);

    ordered_json to_json() const;
    static ToyLanguageModel from_json(const ordered_json& j);
    void save(const std::filesystem::path& path) const;
    static ToyLanguageModel load(const std::filesystem::path& path);

    bool operator==(const ToyLanguageModel&) const = default;

private:
    std::string context_key(const std::vector<std::string>& tokens, std::size_t end) const;

    int order_;
    double alpha_;
    TokenizerMode mode_;
    std::set<std::string> vocab_;
    Counts counts_;
};

// Returns a copy of `model` with counts increased by mix * (weighted counts
// of each text). Zero-weight samples leave the count tables untouched.
ToyLanguageModel train_update(const ToyLanguageModel& model,
                              const std::vector<std::pair<std::string, double>>& samples,
                              double mix);

} // namespace iwsi

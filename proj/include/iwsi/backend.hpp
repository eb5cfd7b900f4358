#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iwsi/records.hpp"
#include "iwsi/toy_model.hpp"

namespace iwsi {

struct PromptDemo {
    std::string question;
    std::string rationale;
    std::string answer;
};

// Few-shot CoT prompt. Rendering is a plain concatenation so identical
// inputs produce identical prompts.
struct PromptTemplate {
    std::vector<PromptDemo> cot_examples;
    std::string question_prefix = "Q: ";
    std::string answer_prefix = "\nA: ";

    // Demonstrations, then the question and the answer prefix.
    std::string render(const std::string& question_text) const;

    // Conditioning context for sft scoring: question and prefixes only.
    // CoT demonstrations are applied at generation time, never when scoring.
    std::string render_context(const std::string& question_text) const;

    ordered_json to_json() const;
    static PromptTemplate from_json(const ordered_json& j);
    static PromptTemplate load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Target text for sft scoring and training. The rationale is used as-is when
// it already ends in an answer marker matching `answer`; otherwise the answer
// sentence is appended. An empty answer leaves the rationale untouched.
std::string render_sft_target(const std::string& rationale, const std::string& answer);

// Text after the last case-insensitive "the answer is", trimmed of
// whitespace and trailing '.', ',' (and ')' when unbalanced). Total: never
// throws, absent when the marker is missing or nothing follows it.
std::optional<std::string> extract_answer(const std::string& completion);

// Canonical form used for answer equality: trim, lowercase, strip one pair
// of surrounding parentheses. Multiple-choice prompts answer "(A)" while
// arithmetic answers are bare numerals.
std::string normalize_answer(const std::string& answer);

struct ScoreItem {
    std::string context;
    std::string target;
};

// Generator/scorer contract shared by the toy model and the remote client.
// Implementations must be safe to share across concurrent scoring workers.
class Backend {
public:
    virtual ~Backend() = default;

    // n completions of the prompt; deterministic for the toy backend given
    // (model, prompt, n, temperature, seed).
    virtual std::vector<std::string> complete(const std::string& prompt, int n, double temperature,
                                              std::uint64_t seed) const = 0;

    // Mean per-token NLL (nats) of each target given its context, positionally
    // aligned with items. Equal to scoring the items one at a time.
    virtual std::vector<double> score(const std::vector<ScoreItem>& items) const = 0;
};

class ToyBackend : public Backend {
public:
    explicit ToyBackend(ToyLanguageModel model, int max_tokens = 160)
        : model_(std::move(model)), max_tokens_(max_tokens) {}

    const ToyLanguageModel& model() const { return model_; }
    int max_tokens() const { return max_tokens_; }

    std::vector<std::string> complete(const std::string& prompt, int n, double temperature,
                                      std::uint64_t seed) const override;

    // OpenMP-parallel over items; bit-identical to score_items_serial.
    std::vector<double> score(const std::vector<ScoreItem>& items) const override;

private:
    ToyLanguageModel model_;
    int max_tokens_;
};

// Serial reference for the parallel scoring kernel; kept for tests and the
// benchmark.
std::vector<double> score_items_serial(const ToyLanguageModel& model,
                                       const std::vector<ScoreItem>& items);

GenerationRecord generate_candidates(const Backend& backend, const PromptTemplate& prompt,
                                     const Question& question, int m, double temperature,
                                     std::uint64_t seed);

double sft_loss(const Backend& backend, const PromptTemplate& prompt, const Question& question,
                const std::string& rationale, const std::string& answer);

std::vector<double> score_batch(const Backend& backend, const PromptTemplate& prompt,
                                const std::vector<ConsistentSample>& samples);
std::vector<double> score_batch(const Backend& backend, const PromptTemplate& prompt,
                                const std::vector<ValidSample>& samples);

} // namespace iwsi

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "iwsi/backend.hpp"
#include "iwsi/records.hpp"
#include "iwsi/rng.hpp"
#include "iwsi/toy_model.hpp"

namespace iwsi {

// Templated multi-step integer word problems. Gold rationales end with the
// answer sentence, so correctness, valid sets and contamination are all
// checkable by construction.
struct SyntheticSample {
    Question question;
    std::string gold_rationale;
    std::string gold_answer;
};

std::vector<SyntheticSample> make_synthetic_task(std::size_t count, std::uint64_t seed,
                                                 const std::string& id_prefix = "syn");

std::vector<Question> synthetic_questions(const std::vector<SyntheticSample>& task);
std::vector<ValidSample> synthetic_valid_samples(const std::vector<SyntheticSample>& task);
std::map<std::string, std::string> synthetic_gold(const std::vector<SyntheticSample>& task);

// Gold rationales as consistent samples (unanimous single-candidate vote),
// the shape contamination_eval perturbs.
std::vector<ConsistentSample> synthetic_consistent_samples(
    const std::vector<SyntheticSample>& task);

// Three fixed demonstrations in the synthetic task's own style.
PromptTemplate synthetic_prompt_template();

// Trains an n-gram model on the gold question/rationale texts.
ToyLanguageModel train_synthetic_model(const std::vector<SyntheticSample>& corpus, int order,
                                       double alpha, const PromptTemplate& prompt);

// The correct-but-shifted sample taxonomy used by the contamination study.
enum class ShiftKind { redundant, jumping, spurious };

ShiftKind shift_kind_from_string(const std::string& s);
std::string to_string(ShiftKind kind);

// redundant: duplicated reasoning plus off-domain filler sentences
// jumping:   rationale collapsed to the bare answer sentence
// spurious:  wrong-arithmetic chain that still ends in the correct answer
std::string perturb_rationale(const SyntheticSample& sample, ShiftKind kind, Rng& rng);

} // namespace iwsi

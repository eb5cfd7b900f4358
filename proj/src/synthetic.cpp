#include "iwsi/synthetic.hpp"

#include <array>

#include "iwsi/errors.hpp"

namespace iwsi {

namespace {

const std::array<const char*, 8> kNames = {"Alice", "Ben",   "Carla", "Dan",
                                           "Ella",  "Fred",  "Greta", "Hugo"};
const std::array<const char*, 8> kItems = {"apples", "pears",  "coins",  "books",
                                           "marbles", "stamps", "shells", "pencils"};
const std::array<const char*, 4> kGainVerbs = {"buys", "finds", "wins", "collects"};
const std::array<const char*, 4> kLoseVerbs = {"gives away", "loses", "sells", "drops"};

// Off-domain filler for redundant perturbations; none of these words appear
// in the task corpus, so a model trained on clean text treats them as unseen.
const std::array<const char*, 5> kFiller = {
    "The sky turned gray over the quiet harbor that evening.",
    "A distant train whistled twice beyond the frozen hills.",
    "Nobody remembered why the old clock never chimed at noon.",
    "Somewhere outside a dog barked at the restless wind.",
    "The lantern flickered softly against the cellar wall.",
};

int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1)));
}

std::string first_sentence(const std::string& text) {
    std::size_t dot = text.find('.');
    return dot == std::string::npos ? text : text.substr(0, dot + 1);
}

} // namespace

std::vector<SyntheticSample> make_synthetic_task(std::size_t count, std::uint64_t seed,
                                                 const std::string& id_prefix) {
    std::vector<SyntheticSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::string name = kNames[rng.uniform_index(kNames.size())];
        std::string item = kItems[rng.uniform_index(kItems.size())];
        std::string gain = kGainVerbs[rng.uniform_index(kGainVerbs.size())];
        std::string lose = kLoseVerbs[rng.uniform_index(kLoseVerbs.size())];
        int a = uniform_int(rng, 5, 30);
        int b = uniform_int(rng, 2, 15);
        int c = uniform_int(rng, 2, std::min(a + b - 1, 15));
        int result = a + b - c;

        SyntheticSample s;
        s.question.id = id_prefix + "-" + std::to_string(i);
        s.question.text = name + " has " + std::to_string(a) + " " + item + ". " + name + " " +
                          gain + " " + std::to_string(b) + " more " + item + ". Then " + name +
                          " " + lose + " " + std::to_string(c) + " " + item + ". How many " +
                          item + " does " + name + " have now?";
        s.gold_answer = std::to_string(result);
        s.gold_rationale = name + " starts with " + std::to_string(a) + " " + item + ". " +
                           std::to_string(a) + " + " + std::to_string(b) + " = " +
                           std::to_string(a + b) + ". " + std::to_string(a + b) + " - " +
                           std::to_string(c) + " = " + std::to_string(result) +
                           ". The answer is " + std::to_string(result) + ".";
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Question> synthetic_questions(const std::vector<SyntheticSample>& task) {
    std::vector<Question> out;
    out.reserve(task.size());
    for (const SyntheticSample& s : task) out.push_back(s.question);
    return out;
}

std::vector<ValidSample> synthetic_valid_samples(const std::vector<SyntheticSample>& task) {
    std::vector<ValidSample> out;
    out.reserve(task.size());
    for (const SyntheticSample& s : task)
        out.push_back({s.question, s.gold_rationale, s.gold_answer});
    return out;
}

std::map<std::string, std::string> synthetic_gold(const std::vector<SyntheticSample>& task) {
    std::map<std::string, std::string> out;
    for (const SyntheticSample& s : task) out[s.question.id] = s.gold_answer;
    return out;
}

std::vector<ConsistentSample> synthetic_consistent_samples(
    const std::vector<SyntheticSample>& task) {
    std::vector<ConsistentSample> out;
    out.reserve(task.size());
    for (const SyntheticSample& s : task) {
        ConsistentSample c;
        c.question = s.question;
        c.rationale = s.gold_rationale;
        c.voted_answer = s.gold_answer;
        c.vote_count = 1;
        c.num_candidates = 1;
        c.uncertainty = 0.0;
        out.push_back(std::move(c));
    }
    return out;
}

PromptTemplate synthetic_prompt_template() {
    PromptTemplate t;
    t.cot_examples = {
        {"Mara has 10 apples. Mara buys 4 more apples. Then Mara loses 3 apples. How many "
         "apples does Mara have now?",
         "Mara starts with 10 apples. 10 + 4 = 14. 14 - 3 = 11. The answer is 11.", "11"},
        {"Tom has 8 coins. Tom finds 5 more coins. Then Tom drops 2 coins. How many coins "
         "does Tom have now?",
         "Tom starts with 8 coins. 8 + 5 = 13. 13 - 2 = 11. The answer is 11.", "11"},
        {"Lena has 20 books. Lena wins 6 more books. Then Lena sells 9 books. How many books "
         "does Lena have now?",
         "Lena starts with 20 books. 20 + 6 = 26. 26 - 9 = 17. The answer is 17.", "17"},
    };
    return t;
}

ToyLanguageModel train_synthetic_model(const std::vector<SyntheticSample>& corpus, int order,
                                       double alpha, const PromptTemplate& prompt) {
    ToyLanguageModel model(order, alpha, TokenizerMode::word);
    for (const SyntheticSample& s : corpus)
        model.accumulate(prompt.render_context(s.question.text) +
                             render_sft_target(s.gold_rationale, s.gold_answer),
                         1.0);
    return model;
}

ShiftKind shift_kind_from_string(const std::string& s) {
    if (s == "redundant") return ShiftKind::redundant;
    if (s == "jumping") return ShiftKind::jumping;
    if (s == "spurious") return ShiftKind::spurious;
    throw Error(ExitCode::precondition, "unknown shift kind: " + s);
}

std::string to_string(ShiftKind kind) {
    switch (kind) {
        case ShiftKind::redundant: return "redundant";
        case ShiftKind::jumping: return "jumping";
        case ShiftKind::spurious: return "spurious";
    }
    return "redundant";
}

std::string perturb_rationale(const SyntheticSample& sample, ShiftKind kind, Rng& rng) {
    switch (kind) {
        case ShiftKind::jumping:
            return "The answer is " + sample.gold_answer + ".";
        case ShiftKind::redundant: {
            std::string opener = first_sentence(sample.gold_rationale);
            std::string filler_a = kFiller[rng.uniform_index(kFiller.size())];
            std::string filler_b = kFiller[rng.uniform_index(kFiller.size())];
            return opener + " " + filler_a + " " + opener + " " + opener + " " + filler_b + " " +
                   sample.gold_rationale;
        }
        case ShiftKind::spurious: {
            // a chain of in-range but wrong equations, correct final sentence
            int p = uniform_int(rng, 5, 30);
            int q = uniform_int(rng, 2, 15);
            int w1 = uniform_int(rng, 5, 45);
            int r = uniform_int(rng, 2, 15);
            int w2 = uniform_int(rng, 5, 45);
            int s = uniform_int(rng, 2, 15);
            int w3 = uniform_int(rng, 2, 45);
            return std::to_string(p) + " + " + std::to_string(q) + " = " + std::to_string(w1) +
                   ". " + std::to_string(w1) + " + " + std::to_string(r) + " = " +
                   std::to_string(w2) + ". " + std::to_string(w2) + " - " + std::to_string(s) +
                   " = " + std::to_string(w3) + ". The answer is " + sample.gold_answer + ".";
        }
    }
    return sample.gold_rationale;
}

} // namespace iwsi

#include "iwsi/backend.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>

#include "iwsi/errors.hpp"
#include "iwsi/rng.hpp"

namespace iwsi {

namespace {

// Runs fn(i) for i in [0, n) in parallel. Exceptions may not escape an OpenMP
// region, so the lowest failing index is recorded and its (deterministic)
// computation is replayed serially to rethrow.
template <class Fn>
void parallel_for_indexed(std::ptrdiff_t n, Fn&& fn) {
    std::atomic<std::ptrdiff_t> first_bad{std::numeric_limits<std::ptrdiff_t>::max()};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            fn(i);
        } catch (...) {
            std::ptrdiff_t seen = first_bad.load();
            while (i < seen && !first_bad.compare_exchange_weak(seen, i)) {
            }
        }
    }
    std::ptrdiff_t bad = first_bad.load();
    if (bad != std::numeric_limits<std::ptrdiff_t>::max()) fn(bad);
}

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void rtrim(std::string& s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
}

void ltrim(std::string& s) {
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    s.erase(0, i);
}

constexpr const char* kAnswerMarker = "the answer is";

} // namespace

std::string PromptTemplate::render(const std::string& question_text) const {
    std::string out;
    for (const PromptDemo& demo : cot_examples) {
        out += question_prefix;
        out += demo.question;
        out += answer_prefix;
        out += render_sft_target(demo.rationale, demo.answer);
        out += "\n\n";
    }
    out += question_prefix;
    out += question_text;
    out += answer_prefix;
    return out;
}

std::string PromptTemplate::render_context(const std::string& question_text) const {
    return question_prefix + question_text + answer_prefix;
}

ordered_json PromptTemplate::to_json() const {
    ordered_json demos = ordered_json::array();
    for (const PromptDemo& d : cot_examples)
        demos.push_back(ordered_json{
            {"question", d.question}, {"rationale", d.rationale}, {"answer", d.answer}});
    return ordered_json{{"question_prefix", question_prefix},
                        {"answer_prefix", answer_prefix},
                        {"cot_examples", std::move(demos)}};
}

PromptTemplate PromptTemplate::from_json(const ordered_json& j) {
    PromptTemplate t;
    t.question_prefix = j.value("question_prefix", t.question_prefix);
    t.answer_prefix = j.value("answer_prefix", t.answer_prefix);
    if (j.contains("cot_examples")) {
        for (const auto& jd : j.at("cot_examples")) {
            PromptDemo d;
            d.question = jd.at("question").get<std::string>();
            d.rationale = jd.at("rationale").get<std::string>();
            d.answer = jd.value("answer", std::string());
            t.cot_examples.push_back(std::move(d));
        }
    }
    return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("invalid JSON in " + path.string());
    return from_json(j);
}

void PromptTemplate::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

std::string render_sft_target(const std::string& rationale, const std::string& answer) {
    if (answer.empty()) return rationale;
    if (auto parsed = extract_answer(rationale);
        parsed && normalize_answer(*parsed) == normalize_answer(answer))
        return rationale;
    return rationale + " The answer is " + answer + ".";
}

std::string normalize_answer(const std::string& answer) {
    std::string s = answer;
    ltrim(s);
    rtrim(s);
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
        s = s.substr(1, s.size() - 2);
        ltrim(s);
        rtrim(s);
    }
    return lowercase(s);
}

std::optional<std::string> extract_answer(const std::string& completion) {
    std::string lower = lowercase(completion);
    std::size_t pos = lower.rfind(kAnswerMarker);
    if (pos == std::string::npos) return std::nullopt;

    std::string tail = completion.substr(pos + std::string(kAnswerMarker).size());
    ltrim(tail);
    rtrim(tail);
    for (;;) {
        if (!tail.empty() && (tail.back() == '.' || tail.back() == ',')) {
            tail.pop_back();
        } else if (!tail.empty() && tail.back() == ')' && tail.find('(') == std::string::npos) {
            tail.pop_back();
        } else {
            break;
        }
        rtrim(tail);
    }
    if (tail.empty()) return std::nullopt;
    return tail;
}

std::vector<std::string> ToyBackend::complete(const std::string& prompt, int n, double temperature,
                                              std::uint64_t seed) const {
    if (n < 1) throw Error(ExitCode::precondition, "need at least one completion");
    std::vector<std::string> out(static_cast<std::size_t>(n));
    parallel_for_indexed(n, [&](std::ptrdiff_t j) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
        out[static_cast<std::size_t>(j)] = model_.complete(prompt, temperature, rng, max_tokens_);
    });
    return out;
}

std::vector<double> ToyBackend::score(const std::vector<ScoreItem>& items) const {
    std::vector<double> out(items.size());
    parallel_for_indexed(static_cast<std::ptrdiff_t>(items.size()), [&](std::ptrdiff_t i) {
        const ScoreItem& item = items[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = model_.sequence_nll(item.context, item.target);
    });
    return out;
}

std::vector<double> score_items_serial(const ToyLanguageModel& model,
                                       const std::vector<ScoreItem>& items) {
    std::vector<double> out;
    out.reserve(items.size());
    for (const ScoreItem& item : items) out.push_back(model.sequence_nll(item.context, item.target));
    return out;
}

GenerationRecord generate_candidates(const Backend& backend, const PromptTemplate& prompt,
                                     const Question& question, int m, double temperature,
                                     std::uint64_t seed) {
    if (m < 1) throw Error(ExitCode::precondition, "m must be >= 1");
    if (!(temperature > 0.0)) throw Error(ExitCode::precondition, "temperature must be > 0");

    GenerationRecord record;
    record.question = question;
    record.temperature = temperature;
    record.seed = seed;

    auto completions = backend.complete(prompt.render(question.text), m, temperature, seed);
    if (completions.size() != static_cast<std::size_t>(m))
        throw RemoteError("backend returned " + std::to_string(completions.size()) +
                          " completions, expected " + std::to_string(m));
    for (int j = 0; j < m; ++j) {
        const std::string& text = completions[static_cast<std::size_t>(j)];
        if (text.empty()) throw EmptyCompletionError("empty completion for question " + question.id);
        Candidate c;
        c.index = j;
        c.rationale = text;
        c.answer = extract_answer(text);
        record.candidates.push_back(std::move(c));
    }
    return record;
}

double sft_loss(const Backend& backend, const PromptTemplate& prompt, const Question& question,
                const std::string& rationale, const std::string& answer) {
    if (rationale.empty()) throw TokenizationError("rationale must be non-empty");
    std::vector<ScoreItem> items{
        {prompt.render_context(question.text), render_sft_target(rationale, answer)}};
    return backend.score(items).at(0);
}

std::vector<double> score_batch(const Backend& backend, const PromptTemplate& prompt,
                                const std::vector<ConsistentSample>& samples) {
    std::vector<ScoreItem> items;
    items.reserve(samples.size());
    for (const ConsistentSample& s : samples)
        items.push_back({prompt.render_context(s.question.text),
                         render_sft_target(s.rationale, s.voted_answer)});
    return backend.score(items);
}

std::vector<double> score_batch(const Backend& backend, const PromptTemplate& prompt,
                                const std::vector<ValidSample>& samples) {
    std::vector<ScoreItem> items;
    items.reserve(samples.size());
    for (const ValidSample& s : samples)
        items.push_back(
            {prompt.render_context(s.question.text), render_sft_target(s.rationale, s.answer)});
    return backend.score(items);
}

} // namespace iwsi

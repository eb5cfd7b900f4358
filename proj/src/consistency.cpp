#include "iwsi/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "iwsi/backend.hpp"
#include "iwsi/errors.hpp"

namespace iwsi {

double uncertainty(const std::vector<std::optional<std::string>>& answers, int m) {
    if (m < 1 || static_cast<std::size_t>(m) != answers.size())
        throw Error(ExitCode::precondition, "m must equal the number of answers and be >= 1");

    std::map<std::string, int> counts;
    for (const auto& a : answers)
        if (a) ++counts[normalize_answer(*a)];
    if (counts.empty()) return 1.0;
    if (m == 1) return 0.0;

    double u = 0.0;
    for (const auto& [answer, count] : counts) {
        double p = static_cast<double>(count) / static_cast<double>(m);
        u -= p * std::log(p);
    }
    u /= std::log(static_cast<double>(m));
    return std::clamp(u, 0.0, 1.0);
}

VoteResult majority_vote(const GenerationRecord& record) {
    struct Class {
        std::string representative; // original form of the earliest candidate
        int count = 0;
        int first_index = 0;
    };
    std::map<std::string, Class> classes;
    std::vector<std::optional<std::string>> answers;
    answers.reserve(record.candidates.size());

    for (const Candidate& c : record.candidates) {
        answers.push_back(c.answer);
        if (!c.answer) continue;
        std::string key = normalize_answer(*c.answer);
        auto [it, inserted] = classes.try_emplace(key);
        if (inserted) {
            it->second.representative = *c.answer;
            it->second.first_index = c.index;
        }
        ++it->second.count;
    }
    if (classes.empty()) throw NoParseableAnswerError(record.question.id);

    const Class* winner = nullptr;
    for (const auto& [key, cls] : classes) {
        if (winner == nullptr || cls.count > winner->count ||
            (cls.count == winner->count && cls.first_index < winner->first_index))
            winner = &cls;
    }

    VoteResult result;
    result.voted_answer = winner->representative;
    result.vote_count = winner->count;
    for (const auto& [key, cls] : classes) result.answer_histogram[cls.representative] = cls.count;
    result.uncertainty = uncertainty(answers, static_cast<int>(record.candidates.size()));
    return result;
}

std::vector<ConsistentSample> keep_rationales(const GenerationRecord& record,
                                              const VoteResult& vote) {
    std::string winner_key = normalize_answer(vote.voted_answer);
    std::vector<ConsistentSample> out;
    for (const Candidate& c : record.candidates) {
        if (!c.answer || normalize_answer(*c.answer) != winner_key) continue;
        ConsistentSample s;
        s.question = record.question;
        s.rationale = c.rationale;
        s.voted_answer = vote.voted_answer;
        s.vote_count = vote.vote_count;
        s.num_candidates = static_cast<int>(record.candidates.size());
        s.uncertainty = vote.uncertainty;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ConsistentSample> entropy_filter(const std::vector<ConsistentSample>& samples,
                                             double u_star) {
    if (u_star < 0.0 || u_star > 1.0)
        throw Error(ExitCode::precondition, "u_star must lie in [0,1]");
    std::vector<ConsistentSample> out;
    for (const ConsistentSample& s : samples)
        if (s.uncertainty <= u_star) out.push_back(s);
    return out;
}

} // namespace iwsi

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iwsi/records.hpp"

namespace iwsi {

struct VoteResult {
    std::string voted_answer;                   // original form of the winning class
    int vote_count = 0;                         // max histogram value
    std::map<std::string, int> answer_histogram; // parseable answers only
    double uncertainty = 0.0;                   // normalized entropy, [0,1]
};

// Normalized entropy of the answer histogram. Counts divide by m (unparseable
// candidates stay in the denominator but not in the unique-answer set), the
// result divides by ln m and clamps to [0,1]. No parseable answer at all
// means maximal uncertainty 1; m == 1 with a parseable answer is unanimous,
// hence 0.
double uncertainty(const std::vector<std::optional<std::string>>& answers, int m);

// Argmax over parseable answers under normalize_answer equality; ties break
// toward the answer whose earliest candidate has the lowest index. Throws
// NoParseableAnswerError when every candidate is unparseable (the question
// is then dropped from the consistency-filtered set).
VoteResult majority_vote(const GenerationRecord& record);

// One ConsistentSample per candidate agreeing with the voted answer, in
// candidate order. Output size always equals vote_count.
std::vector<ConsistentSample> keep_rationales(const GenerationRecord& record,
                                              const VoteResult& vote);

// Keeps samples with uncertainty <= u_star, order preserved. Inclusive so
// u_star == 0 still admits unanimous questions.
std::vector<ConsistentSample> entropy_filter(const std::vector<ConsistentSample>& samples,
                                             double u_star);

} // namespace iwsi

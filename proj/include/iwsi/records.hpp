#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iwsi/errors.hpp"

namespace iwsi {

using ordered_json = nlohmann::ordered_json;

// An unlabeled question. Ids are unique within a questions file.
struct Question {
    std::string id;
    std::string text;

    bool operator==(const Question&) const = default;
};

// One sampled completion for a question. `answer` is absent when no answer
// marker could be parsed out of the rationale.
struct Candidate {
    int index = 0;
    std::string rationale;
    std::optional<std::string> answer;

    bool operator==(const Candidate&) const = default;
};

struct GenerationRecord {
    Question question;
    std::vector<Candidate> candidates;
    double temperature = 1.0;
    std::uint64_t seed = 0;

    bool operator==(const GenerationRecord&) const = default;
};

// A (question, rationale, voted answer) training triple that survived
// majority voting.
struct ConsistentSample {
    Question question;
    std::string rationale;
    std::string voted_answer;
    int vote_count = 1;
    int num_candidates = 1;
    double uncertainty = 0.0;

    bool operator==(const ConsistentSample&) const = default;
};

// A trusted human-written demonstration.
struct ValidSample {
    Question question;
    std::string rationale;
    std::string answer;

    bool operator==(const ValidSample&) const = default;
};

struct ScoredSample {
    ConsistentSample sample;
    double loss = 0.0;         // mean per-token sft loss, nats
    double naive_weight = 1.0; // w' from the valid-mean / loss ratio
    double ds_weight = 1.0;    // max(w', 1/w'), always >= 1

    bool operator==(const ScoredSample&) const = default;
};

struct ValidSetSummary {
    std::size_t size = 0;
    std::vector<double> losses;
    double mean = 0.0;
    double stddev = 0.0; // population standard deviation

    bool operator==(const ValidSetSummary&) const = default;
};

// Invariant checks. Throw SchemaError naming the offending field.
void validate(const Question& q);
void validate(const GenerationRecord& r);
void validate(const ConsistentSample& s);
void validate(const ValidSample& v);
void validate(const ScoredSample& s);
void validate(const ValidSetSummary& s);

// Serialization with a fixed key order per record kind (byte-stable goldens):
//   questions    {"id","text"}
//   generations  {"question":{"id","text"},"candidates":[{"index","rationale","answer"?}],
//                 "temperature","seed"}
//   consistent   {"question":{...},"rationale","voted_answer","vote_count",
//                 "num_candidates","uncertainty"}
//   valid        {"question":{...},"rationale","answer"}
//   scored       consistent keys plus {"loss","naive_weight","ds_weight"}
// Absent candidate answers omit the "answer" key entirely.
ordered_json to_json(const Question& q);
ordered_json to_json(const GenerationRecord& r);
ordered_json to_json(const ConsistentSample& s);
ordered_json to_json(const ValidSample& v);
ordered_json to_json(const ScoredSample& s);
ordered_json to_json(const ValidSetSummary& s);

void from_json(const ordered_json& j, Question& q);
void from_json(const ordered_json& j, GenerationRecord& r);
void from_json(const ordered_json& j, ConsistentSample& s);
void from_json(const ordered_json& j, ValidSample& v);
void from_json(const ordered_json& j, ScoredSample& s);
void from_json(const ordered_json& j, ValidSetSummary& s);

// Reads a JSONL file, validating every record. The whole file is rejected on
// the first violation, with the 1-based line number. Question ids must be
// unique per file for questions, generations and valid files; consistent and
// scored files legitimately repeat them (several kept rationales share one
// question).
template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path);

// Validates all records first, then writes one JSON object per line, UTF-8,
// LF endings. Doubles use the shortest round-trip representation, so a
// read-back compares bit-equal.
template <class T>
void write_jsonl(const std::vector<T>& records, const std::filesystem::path& path);

extern template std::vector<Question> read_jsonl<Question>(const std::filesystem::path&);
extern template std::vector<GenerationRecord> read_jsonl<GenerationRecord>(const std::filesystem::path&);
extern template std::vector<ConsistentSample> read_jsonl<ConsistentSample>(const std::filesystem::path&);
extern template std::vector<ValidSample> read_jsonl<ValidSample>(const std::filesystem::path&);
extern template std::vector<ScoredSample> read_jsonl<ScoredSample>(const std::filesystem::path&);

extern template void write_jsonl<Question>(const std::vector<Question>&, const std::filesystem::path&);
extern template void write_jsonl<GenerationRecord>(const std::vector<GenerationRecord>&, const std::filesystem::path&);
extern template void write_jsonl<ConsistentSample>(const std::vector<ConsistentSample>&, const std::filesystem::path&);
extern template void write_jsonl<ValidSample>(const std::vector<ValidSample>&, const std::filesystem::path&);
extern template void write_jsonl<ScoredSample>(const std::vector<ScoredSample>&, const std::filesystem::path&);

// Sidecar JSON (single object, not JSONL) for the valid-set summary.
void write_valid_summary(const ValidSetSummary& s, const std::filesystem::path& path);
ValidSetSummary read_valid_summary(const std::filesystem::path& path);

} // namespace iwsi

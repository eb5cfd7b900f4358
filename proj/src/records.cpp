#include "iwsi/records.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace iwsi {

namespace {

bool finite(double x) { return std::isfinite(x); }

void require(bool cond, const std::string& msg, const std::string& field) {
    if (!cond) throw SchemaError(msg, 0, field);
}

const ordered_json& expect_field(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError("missing field", 0, key);
    return *it;
}

std::string expect_string(const ordered_json& j, const char* key) {
    const auto& v = expect_field(j, key);
    if (!v.is_string()) throw SchemaError("expected string", 0, key);
    return v.get<std::string>();
}

double expect_number(const ordered_json& j, const char* key) {
    const auto& v = expect_field(j, key);
    if (!v.is_number()) throw SchemaError("expected number", 0, key);
    return v.get<double>();
}

std::int64_t expect_integer(const ordered_json& j, const char* key) {
    const auto& v = expect_field(j, key);
    if (!v.is_number_integer()) throw SchemaError("expected integer", 0, key);
    return v.get<std::int64_t>();
}

} // namespace

void validate(const Question& q) {
    require(!q.id.empty(), "question id must be non-empty", "id");
    require(!q.text.empty(), "question text must be non-empty", "text");
}

void validate(const GenerationRecord& r) {
    validate(r.question);
    require(!r.candidates.empty(), "at least one candidate required", "candidates");
    require(finite(r.temperature) && r.temperature > 0.0, "temperature must be > 0", "temperature");
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        const Candidate& c = r.candidates[i];
        require(c.index == static_cast<int>(i), "candidate indices must form 0..m-1", "index");
        require(!c.rationale.empty(), "candidate rationale must be non-empty", "rationale");
    }
}

void validate(const ConsistentSample& s) {
    validate(s.question);
    require(!s.rationale.empty(), "rationale must be non-empty", "rationale");
    require(!s.voted_answer.empty(), "voted answer must be non-empty", "voted_answer");
    require(s.vote_count >= 1, "vote_count must be >= 1", "vote_count");
    require(s.num_candidates >= s.vote_count, "vote_count exceeds num_candidates", "vote_count");
    require(finite(s.uncertainty) && s.uncertainty >= 0.0 && s.uncertainty <= 1.0,
            "uncertainty must lie in [0,1]", "uncertainty");
    bool unanimous = s.vote_count == s.num_candidates;
    require((s.uncertainty == 0.0) == unanimous, "uncertainty is zero iff the vote was unanimous",
            "uncertainty");
}

void validate(const ValidSample& v) {
    validate(v.question);
    require(!v.rationale.empty(), "rationale must be non-empty", "rationale");
    require(!v.answer.empty(), "answer must be non-empty", "answer");
}

void validate(const ScoredSample& s) {
    validate(s.sample);
    require(finite(s.loss) && s.loss >= 0.0, "loss must be finite and >= 0", "loss");
    require(finite(s.naive_weight) && s.naive_weight > 0.0, "naive_weight must be > 0", "naive_weight");
    double expected = s.naive_weight >= 1.0 ? s.naive_weight : 1.0 / s.naive_weight;
    require(s.ds_weight == expected, "ds_weight must equal max(naive_weight, 1/naive_weight)",
            "ds_weight");
    require(s.ds_weight >= 1.0, "ds_weight must be >= 1", "ds_weight");
}

void validate(const ValidSetSummary& s) {
    require(s.size >= 1, "valid set must be non-empty", "size");
    require(s.size == s.losses.size(), "size must equal losses length", "size");
    double sum = 0.0;
    for (double l : s.losses) {
        require(finite(l) && l >= 0.0, "losses must be finite and >= 0", "losses");
        sum += l;
    }
    double mean = sum / static_cast<double>(s.size);
    require(std::abs(mean - s.mean) <= 1e-9 * std::max(1.0, std::abs(mean)),
            "mean must equal the arithmetic mean of losses", "mean");
    require(finite(s.stddev) && s.stddev >= 0.0, "stddev must be >= 0", "stddev");
}

ordered_json to_json(const Question& q) {
    return ordered_json{{"id", q.id}, {"text", q.text}};
}

ordered_json to_json(const GenerationRecord& r) {
    ordered_json cands = ordered_json::array();
    for (const Candidate& c : r.candidates) {
        ordered_json jc{{"index", c.index}, {"rationale", c.rationale}};
        if (c.answer) jc["answer"] = *c.answer;
        cands.push_back(std::move(jc));
    }
    return ordered_json{{"question", to_json(r.question)},
                        {"candidates", std::move(cands)},
                        {"temperature", r.temperature},
                        {"seed", r.seed}};
}

ordered_json to_json(const ConsistentSample& s) {
    return ordered_json{{"question", to_json(s.question)},
                        {"rationale", s.rationale},
                        {"voted_answer", s.voted_answer},
                        {"vote_count", s.vote_count},
                        {"num_candidates", s.num_candidates},
                        {"uncertainty", s.uncertainty}};
}

ordered_json to_json(const ValidSample& v) {
    return ordered_json{{"question", to_json(v.question)},
                        {"rationale", v.rationale},
                        {"answer", v.answer}};
}

ordered_json to_json(const ScoredSample& s) {
    ordered_json j = to_json(s.sample);
    j["loss"] = s.loss;
    j["naive_weight"] = s.naive_weight;
    j["ds_weight"] = s.ds_weight;
    return j;
}

ordered_json to_json(const ValidSetSummary& s) {
    return ordered_json{{"size", s.size}, {"losses", s.losses}, {"mean", s.mean}, {"stddev", s.stddev}};
}

void from_json(const ordered_json& j, Question& q) {
    q.id = expect_string(j, "id");
    q.text = expect_string(j, "text");
}

void from_json(const ordered_json& j, GenerationRecord& r) {
    from_json(expect_field(j, "question"), r.question);
    const auto& cands = expect_field(j, "candidates");
    if (!cands.is_array()) throw SchemaError("expected array", 0, "candidates");
    r.candidates.clear();
    for (const auto& jc : cands) {
        Candidate c;
        c.index = static_cast<int>(expect_integer(jc, "index"));
        c.rationale = expect_string(jc, "rationale");
        if (jc.contains("answer")) c.answer = expect_string(jc, "answer");
        r.candidates.push_back(std::move(c));
    }
    r.temperature = expect_number(j, "temperature");
    r.seed = static_cast<std::uint64_t>(expect_integer(j, "seed"));
}

void from_json(const ordered_json& j, ConsistentSample& s) {
    from_json(expect_field(j, "question"), s.question);
    s.rationale = expect_string(j, "rationale");
    s.voted_answer = expect_string(j, "voted_answer");
    s.vote_count = static_cast<int>(expect_integer(j, "vote_count"));
    s.num_candidates = static_cast<int>(expect_integer(j, "num_candidates"));
    s.uncertainty = expect_number(j, "uncertainty");
}

void from_json(const ordered_json& j, ValidSample& v) {
    from_json(expect_field(j, "question"), v.question);
    v.rationale = expect_string(j, "rationale");
    v.answer = expect_string(j, "answer");
}

void from_json(const ordered_json& j, ScoredSample& s) {
    from_json(j, s.sample);
    s.loss = expect_number(j, "loss");
    s.naive_weight = expect_number(j, "naive_weight");
    s.ds_weight = expect_number(j, "ds_weight");
}

void from_json(const ordered_json& j, ValidSetSummary& s) {
    s.size = static_cast<std::size_t>(expect_integer(j, "size"));
    const auto& losses = expect_field(j, "losses");
    if (!losses.is_array()) throw SchemaError("expected array", 0, "losses");
    s.losses = losses.get<std::vector<double>>();
    s.mean = expect_number(j, "mean");
    s.stddev = expect_number(j, "stddev");
}

namespace {

// Question-id uniqueness applies where a file holds one record per question
// (or per demonstration); consistent/scored files repeat ids by construction.
template <class T>
struct jsonl_traits;

template <>
struct jsonl_traits<Question> {
    static constexpr bool unique_ids = true;
    static const std::string& id(const Question& q) { return q.id; }
};
template <>
struct jsonl_traits<GenerationRecord> {
    static constexpr bool unique_ids = true;
    static const std::string& id(const GenerationRecord& r) { return r.question.id; }
};
template <>
struct jsonl_traits<ConsistentSample> {
    static constexpr bool unique_ids = false;
    static const std::string& id(const ConsistentSample& s) { return s.question.id; }
};
template <>
struct jsonl_traits<ValidSample> {
    static constexpr bool unique_ids = true;
    static const std::string& id(const ValidSample& v) { return v.question.id; }
};
template <>
struct jsonl_traits<ScoredSample> {
    static constexpr bool unique_ids = false;
    static const std::string& id(const ScoredSample& s) { return s.sample.question.id; }
};

} // namespace

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::vector<T> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw SchemaError("blank line in JSONL file", lineno);
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) throw SchemaError("invalid JSON", lineno);
        if (!j.is_object()) throw SchemaError("expected a JSON object", lineno);
        T record;
        try {
            from_json(j, record);
            validate(record);
        } catch (const SchemaError& e) {
            throw SchemaError(std::string("schema violation: ") + e.what(), lineno, e.field());
        }
        if (jsonl_traits<T>::unique_ids && !seen.insert(jsonl_traits<T>::id(record)).second)
            throw DuplicateIdError(jsonl_traits<T>::id(record), lineno);
        out.push_back(std::move(record));
    }
    if (in.bad()) throw IoError("read failure on " + path.string());
    return out;
}

template <class T>
void write_jsonl(const std::vector<T>& records, const std::filesystem::path& path) {
    for (const T& r : records) validate(r);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const T& r : records) out << to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

template std::vector<Question> read_jsonl<Question>(const std::filesystem::path&);
template std::vector<GenerationRecord> read_jsonl<GenerationRecord>(const std::filesystem::path&);
template std::vector<ConsistentSample> read_jsonl<ConsistentSample>(const std::filesystem::path&);
template std::vector<ValidSample> read_jsonl<ValidSample>(const std::filesystem::path&);
template std::vector<ScoredSample> read_jsonl<ScoredSample>(const std::filesystem::path&);

template void write_jsonl<Question>(const std::vector<Question>&, const std::filesystem::path&);
template void write_jsonl<GenerationRecord>(const std::vector<GenerationRecord>&, const std::filesystem::path&);
template void write_jsonl<ConsistentSample>(const std::vector<ConsistentSample>&, const std::filesystem::path&);
template void write_jsonl<ValidSample>(const std::vector<ValidSample>&, const std::filesystem::path&);
template void write_jsonl<ScoredSample>(const std::vector<ScoredSample>&, const std::filesystem::path&);

void write_valid_summary(const ValidSetSummary& s, const std::filesystem::path& path) {
    validate(s);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json(s).dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

ValidSetSummary read_valid_summary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("invalid JSON in " + path.string());
    ValidSetSummary s;
    from_json(j, s);
    validate(s);
    return s;
}

} // namespace iwsi

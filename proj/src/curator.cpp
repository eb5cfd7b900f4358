#include "iwsi/curator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "iwsi/errors.hpp"
#include "iwsi/version.hpp"

namespace iwsi {

CurationMode curation_mode_from_string(const std::string& s) {
    if (s == "iwsi") return CurationMode::iwsi;
    if (s == "iwsi_w") return CurationMode::iwsi_w;
    if (s == "consistency_only") return CurationMode::consistency_only;
    if (s == "entropy") return CurationMode::entropy;
    throw Error(ExitCode::precondition, "unknown curation mode: " + s);
}

std::string to_string(CurationMode mode) {
    switch (mode) {
        case CurationMode::iwsi: return "iwsi";
        case CurationMode::iwsi_w: return "iwsi_w";
        case CurationMode::consistency_only: return "consistency_only";
        case CurationMode::entropy: return "entropy";
    }
    return "iwsi";
}

void CurationPolicy::validate() const {
    if (mode == CurationMode::iwsi && (!(k > 0.0) || k > 100.0))
        throw Error(ExitCode::precondition, "k must lie in (0, 100]");
    if (mode == CurationMode::iwsi_w && !(clip_c > 0.0))
        throw Error(ExitCode::precondition, "clip constant must be > 0");
    if (mode == CurationMode::entropy && (u_star < 0.0 || u_star > 1.0))
        throw Error(ExitCode::precondition, "u_star must lie in [0,1]");
    if (fixed_sigma && (mode != CurationMode::iwsi || !(*fixed_sigma >= 1.0)))
        throw Error(ExitCode::precondition, "fixed sigma requires iwsi mode and sigma >= 1");
    if (max_per_question && *max_per_question < 1)
        throw Error(ExitCode::precondition, "max_per_question must be >= 1");
}

ordered_json CurationPolicy::to_json() const {
    ordered_json j{{"mode", iwsi::to_string(mode)}};
    switch (mode) {
        case CurationMode::iwsi:
            j["k"] = k;
            if (fixed_sigma) j["fixed_sigma"] = *fixed_sigma;
            break;
        case CurationMode::iwsi_w: j["clip_c"] = clip_c; break;
        case CurationMode::entropy: j["u_star"] = u_star; break;
        case CurationMode::consistency_only: break;
    }
    if (max_per_question) j["max_per_question"] = *max_per_question;
    return j;
}

CurationPolicy CurationPolicy::from_json(const ordered_json& j) {
    CurationPolicy p;
    p.mode = curation_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("k")) p.k = j.at("k").get<double>();
    if (j.contains("clip_c")) p.clip_c = j.at("clip_c").get<double>();
    if (j.contains("u_star")) p.u_star = j.at("u_star").get<double>();
    if (j.contains("fixed_sigma")) p.fixed_sigma = j.at("fixed_sigma").get<double>();
    if (j.contains("max_per_question")) p.max_per_question = j.at("max_per_question").get<int>();
    p.validate();
    return p;
}

std::size_t CuratedSet::kept_count() const {
    std::size_t n = 0;
    for (const CuratedSample& s : samples)
        if (s.training_weight > 0.0) ++n;
    return n;
}

namespace {

// Keeps the cap lowest-ds_weight rationales per question (ties by pool
// position), preserving pool order in the result.
std::vector<ScoredSample> apply_question_cap(const std::vector<ScoredSample>& pool, int cap) {
    std::map<std::string, std::vector<std::size_t>> by_question;
    for (std::size_t i = 0; i < pool.size(); ++i)
        by_question[pool[i].sample.question.id].push_back(i);

    std::vector<bool> keep(pool.size(), false);
    for (auto& [id, indices] : by_question) {
        std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return pool[a].ds_weight < pool[b].ds_weight;
        });
        for (std::size_t r = 0; r < indices.size() && r < static_cast<std::size_t>(cap); ++r)
            keep[indices[r]] = true;
    }
    std::vector<ScoredSample> capped;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (keep[i]) capped.push_back(pool[i]);
    return capped;
}

} // namespace

CuratedSet curate(const std::vector<ScoredSample>& pool, const CurationPolicy& policy) {
    policy.validate();
    if (pool.empty()) throw EmptyPoolError();

    std::vector<ScoredSample> working =
        policy.max_per_question ? apply_question_cap(pool, *policy.max_per_question) : pool;

    CuratedSet out;
    out.policy = policy;

    if (policy.mode == CurationMode::iwsi) {
        double sigma;
        if (policy.fixed_sigma) {
            sigma = *policy.fixed_sigma;
        } else {
            std::vector<double> weights;
            weights.reserve(working.size());
            for (const ScoredSample& s : working) weights.push_back(s.ds_weight);
            sigma = percentile_threshold(weights, policy.k).sigma;
        }
        out.sigma = sigma;
        for (const ScoredSample& s : working)
            out.samples.push_back({s, s.ds_weight <= sigma ? 1.0 : 0.0});
        return out;
    }

    for (const ScoredSample& s : working) {
        double w = 1.0;
        switch (policy.mode) {
            case CurationMode::iwsi_w: w = std::min(s.naive_weight, policy.clip_c); break;
            case CurationMode::entropy: w = s.sample.uncertainty <= policy.u_star ? 1.0 : 0.0; break;
            default: break;
        }
        out.samples.push_back({s, w});
    }
    return out;
}

double weighted_training_loss(const CuratedSet& curated, const std::vector<double>& losses) {
    if (curated.samples.empty()) throw EmptyPoolError();
    if (losses.size() != curated.samples.size())
        throw Error(ExitCode::precondition, "losses must align with the curated pool");

    double weighted_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        weighted_sum += curated.samples[i].training_weight * losses[i];
        weight_sum += curated.samples[i].training_weight;
    }
    double n = static_cast<double>(curated.samples.size());
    switch (curated.policy.mode) {
        case CurationMode::iwsi: return weighted_sum / (n * curated.policy.k / 100.0);
        case CurationMode::iwsi_w: return weighted_sum / n;
        default: return weight_sum > 0.0 ? weighted_sum / weight_sum : 0.0;
    }
}

double training_loss(const CuratedSet& curated, const Backend& backend,
                     const PromptTemplate& prompt) {
    std::vector<ScoreItem> items;
    items.reserve(curated.samples.size());
    for (const CuratedSample& s : curated.samples)
        items.push_back({prompt.render_context(s.sample.sample.question.text),
                         render_sft_target(s.sample.sample.rationale, s.sample.sample.voted_answer)});
    return weighted_training_loss(curated, backend.score(items));
}

std::string training_text(const PromptTemplate& prompt, const ConsistentSample& sample) {
    return prompt.render_context(sample.question.text) +
           render_sft_target(sample.rationale, sample.voted_answer);
}

ToyLanguageModel fine_tune(const ToyLanguageModel& model, const CuratedSet& curated, int epochs,
                           double mix, const PromptTemplate& prompt) {
    if (epochs < 1) throw Error(ExitCode::precondition, "epochs must be >= 1");
    std::vector<std::pair<std::string, double>> batch;
    for (const CuratedSample& s : curated.samples) {
        if (s.training_weight <= 0.0) continue;
        batch.emplace_back(training_text(prompt, s.sample.sample), s.training_weight);
    }
    ToyLanguageModel tuned = model;
    for (int e = 0; e < epochs; ++e) tuned = train_update(tuned, batch, mix);
    return tuned;
}

ExportFormat export_format_from_string(const std::string& s) {
    if (s == "sft_jsonl") return ExportFormat::sft_jsonl;
    if (s == "weighted_jsonl") return ExportFormat::weighted_jsonl;
    throw Error(ExitCode::precondition, "unknown export format: " + s);
}

ordered_json CurationMetadata::to_json() const {
    ordered_json j{{"policy", policy.to_json()}};
    j["sigma"] = sigma ? ordered_json(*sigma) : ordered_json(nullptr);
    j["pool_size"] = pool_size;
    j["kept_count"] = kept_count;
    j["valid_summary"] =
        valid_summary ? iwsi::to_json(*valid_summary) : ordered_json(nullptr);
    j["tool_version"] = tool_version;
    return j;
}

CurationMetadata CurationMetadata::from_json(const ordered_json& j) {
    CurationMetadata m;
    m.policy = CurationPolicy::from_json(j.at("policy"));
    if (!j.at("sigma").is_null()) m.sigma = j.at("sigma").get<double>();
    m.pool_size = j.at("pool_size").get<std::size_t>();
    m.kept_count = j.at("kept_count").get<std::size_t>();
    if (!j.at("valid_summary").is_null()) {
        ValidSetSummary v;
        iwsi::from_json(j.at("valid_summary"), v);
        m.valid_summary = v;
    }
    m.tool_version = j.value("tool_version", std::string());
    return m;
}

void CurationMetadata::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

CurationMetadata CurationMetadata::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("invalid JSON in " + path.string());
    return from_json(j);
}

std::filesystem::path metadata_path_for(const std::filesystem::path& output) {
    std::filesystem::path p = output;
    p += ".meta.json";
    return p;
}

void export_curated(const CuratedSet& curated, ExportFormat format,
                    const std::filesystem::path& path, const PromptTemplate& prompt,
                    const std::optional<ValidSetSummary>& valid_summary) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const CuratedSample& s : curated.samples) {
        if (s.training_weight <= 0.0) continue;
        ordered_json j{{"prompt", prompt.render_context(s.sample.sample.question.text)},
                       {"completion",
                        render_sft_target(s.sample.sample.rationale, s.sample.sample.voted_answer)}};
        if (format == ExportFormat::weighted_jsonl) j["weight"] = s.training_weight;
        out << j.dump() << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());

    CurationMetadata meta;
    meta.policy = curated.policy;
    meta.sigma = curated.sigma;
    meta.pool_size = curated.samples.size();
    meta.kept_count = curated.kept_count();
    meta.valid_summary = valid_summary;
    meta.tool_version = version_string();
    meta.save(metadata_path_for(path));
}

void write_curated_jsonl(const CuratedSet& curated, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const CuratedSample& s : curated.samples) {
        validate(s.sample);
        ordered_json j = to_json(s.sample);
        j["training_weight"] = s.training_weight;
        out << j.dump() << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());

    CurationMetadata meta;
    meta.policy = curated.policy;
    meta.sigma = curated.sigma;
    meta.pool_size = curated.samples.size();
    meta.kept_count = curated.kept_count();
    meta.tool_version = version_string();
    meta.save(metadata_path_for(path));
}

CuratedSet read_curated_jsonl(const std::filesystem::path& path,
                              const std::filesystem::path& meta_path) {
    CurationMetadata meta = CurationMetadata::load(meta_path);
    CuratedSet set;
    set.policy = meta.policy;
    set.sigma = meta.sigma;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw SchemaError("blank line in JSONL file", lineno);
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) throw SchemaError("invalid JSON", lineno);
        CuratedSample s;
        try {
            from_json(j, s.sample);
            validate(s.sample);
            if (!j.contains("training_weight"))
                throw SchemaError("missing field", 0, "training_weight");
            s.training_weight = j.at("training_weight").get<double>();
        } catch (const SchemaError& e) {
            throw SchemaError(std::string("schema violation: ") + e.what(), lineno, e.field());
        }
        if (s.training_weight < 0.0)
            throw SchemaError("training_weight must be >= 0", lineno, "training_weight");
        set.samples.push_back(std::move(s));
    }
    if (in.bad()) throw IoError("read failure on " + path.string());
    return set;
}

} // namespace iwsi

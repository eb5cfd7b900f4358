#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iwsi/analysis.hpp"
#include "iwsi/backend.hpp"
#include "iwsi/config.hpp"
#include "iwsi/consistency.hpp"
#include "iwsi/csv.hpp"
#include "iwsi/curator.hpp"
#include "iwsi/dsweight.hpp"
#include "iwsi/errors.hpp"
#include "iwsi/manifest.hpp"
#include "iwsi/records.hpp"
#include "iwsi/remote.hpp"
#include "iwsi/rng.hpp"
#include "iwsi/synthetic.hpp"
#include "iwsi/toy_model.hpp"
#include "iwsi/version.hpp"

namespace fs = std::filesystem;
using namespace iwsi;

namespace {

// ---------------------------------------------------------------- helpers

struct ConfigFlags {
    std::string config_file;
    std::string backend;
    std::string model; // toy model file
    std::string template_file;
    std::string remote_url;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--config", config_file, "config file (key = value lines)");
        cmd.add_option("--backend", backend, "toy or remote");
        cmd.add_option("--model", model, "toy model JSON file");
        cmd.add_option("--template", template_file, "prompt template JSON file");
        cmd.add_option("--remote-url", remote_url, "remote backend base URL");
    }

    // flags > environment > config file > defaults
    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_file.empty()) cfg.apply_file(config_file);
        cfg.apply_env();
        if (!backend.empty()) cfg.set_key("backend", backend);
        if (!template_file.empty()) cfg.set_key("template", template_file);
        if (!remote_url.empty()) cfg.set_key("remote.base_url", remote_url);
        return cfg;
    }
};

PromptTemplate load_template(const RunConfig& cfg) {
    if (cfg.template_path && !cfg.template_path->empty())
        return PromptTemplate::load(*cfg.template_path);
    return PromptTemplate{};
}

std::unique_ptr<Backend> make_backend(const RunConfig& cfg, const std::string& model_path) {
    if (cfg.backend == "remote") return std::make_unique<RemoteBackend>(cfg.remote);
    if (model_path.empty())
        throw Error(ExitCode::precondition, "the toy backend needs --model <model.json>");
    return std::make_unique<ToyBackend>(ToyLanguageModel::load(model_path), cfg.toy.max_tokens);
}

std::map<std::string, std::string> read_gold(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<std::string, std::string> gold;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw SchemaError("blank line in gold file", lineno);
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("id") || !j.contains("answer"))
            throw SchemaError("gold lines need {\"id\",\"answer\"}", lineno);
        gold[j.at("id").get<std::string>()] = j.at("answer").get<std::string>();
    }
    return gold;
}

void write_gold(const std::map<std::string, std::string>& gold, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& [id, answer] : gold)
        out << ordered_json{{"id", id}, {"answer", answer}}.dump() << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error(ExitCode::precondition, std::string(what) + ": bad number " + item);
        }
    }
    if (out.empty()) throw Error(ExitCode::precondition, std::string(what) + ": empty list");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(text, what)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

struct PolicyFlags {
    std::string mode = "iwsi";
    double k = 80.0;
    double clip = 5.0;
    double u_star = 1.0;
    double sigma = 0.0; // > 0 selects fixed-threshold iwsi
    int max_per_question = 0;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--mode", mode, "iwsi | iwsi_w | consistency_only | entropy");
        cmd.add_option("--k", k, "filtering percentage for iwsi");
        cmd.add_option("--clip", clip, "clip constant C for iwsi_w");
        cmd.add_option("--u-star", u_star, "uncertainty threshold for entropy mode");
        cmd.add_option("--sigma", sigma, "fixed DS-weight threshold (iwsi), skips the rank scan");
        cmd.add_option("--max-per-question", max_per_question,
                       "cap rationales per question (lowest DS weight first)");
    }

    CurationPolicy resolve() const {
        CurationPolicy p;
        p.mode = curation_mode_from_string(mode);
        p.k = k;
        p.clip_c = clip;
        p.u_star = u_star;
        if (sigma > 0.0) p.fixed_sigma = sigma;
        if (max_per_question > 0) p.max_per_question = max_per_question;
        p.validate();
        return p;
    }

    ordered_json to_json() const {
        return ordered_json{{"mode", mode},   {"k", k},
                            {"clip", clip},   {"u_star", u_star},
                            {"sigma", sigma}, {"max_per_question", max_per_question}};
    }

    static PolicyFlags from_json(const ordered_json& j) {
        PolicyFlags f;
        f.mode = j.at("mode").get<std::string>();
        f.k = j.at("k").get<double>();
        f.clip = j.at("clip").get<double>();
        f.u_star = j.at("u_star").get<double>();
        f.sigma = j.at("sigma").get<double>();
        f.max_per_question = j.at("max_per_question").get<int>();
        return f;
    }
};

void emit_manifest(const std::string& command, const ordered_json& params,
                   const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                   const fs::path& primary_output) {
    RunManifest m;
    m.tool_version = version_string();
    m.command = command;
    m.params = params;
    for (const fs::path& p : inputs) m.add_input(p);
    for (const fs::path& p : outputs) m.add_output(p);
    m.save(manifest_path_for(primary_output));
}

fs::path remap_into(const fs::path& original, const fs::path& out_dir) {
    return out_dir / original.filename();
}

// ---------------------------------------------------------------- stages
//
// Each stage round-trips through its manifest params, so `replay` can
// re-execute it with outputs redirected and compare hashes.

struct GenerateStage {
    RunConfig cfg;
    std::string model;
    std::string questions;
    std::string out;
    int m = 15;
    double temperature = 1.1;
    std::uint64_t seed = 0;

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()}, {"model", model},
                            {"questions", questions},  {"out", out},
                            {"m", m},                  {"temperature", temperature},
                            {"seed", seed}};
    }

    static GenerateStage from_params(const ordered_json& j) {
        GenerateStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.model = j.at("model").get<std::string>();
        s.questions = j.at("questions").get<std::string>();
        s.out = j.at("out").get<std::string>();
        s.m = j.at("m").get<int>();
        s.temperature = j.at("temperature").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        return s;
    }

    void remap(const fs::path& dir) { out = remap_into(out, dir).string(); }

    std::vector<fs::path> run() const {
        auto backend = make_backend(cfg, model);
        PromptTemplate prompt = load_template(cfg);
        auto qs = read_jsonl<Question>(questions);

        std::vector<GenerationRecord> records;
        records.reserve(qs.size());
        for (const Question& q : qs)
            records.push_back(generate_candidates(*backend, prompt, q, m, temperature,
                                                  derive_seed(seed, q.id)));
        write_jsonl(records, out);
        std::cerr << "generated " << records.size() << " records -> " << out << "\n";

        std::vector<fs::path> inputs{questions};
        if (!model.empty() && cfg.backend == "toy") inputs.push_back(model);
        if (cfg.template_path && !cfg.template_path->empty())
            inputs.push_back(*cfg.template_path);
        std::vector<fs::path> outputs{out};
        emit_manifest("generate", params(), inputs, outputs, out);
        return outputs;
    }
};

struct VoteStage {
    std::string in;
    std::string out;
    double u_star = -1.0; // < 0 disables entropy filtering

    ordered_json params() const {
        return ordered_json{{"in", in}, {"out", out}, {"u_star", u_star}};
    }

    static VoteStage from_params(const ordered_json& j) {
        VoteStage s;
        s.in = j.at("in").get<std::string>();
        s.out = j.at("out").get<std::string>();
        s.u_star = j.at("u_star").get<double>();
        return s;
    }

    void remap(const fs::path& dir) { out = remap_into(out, dir).string(); }

    std::vector<fs::path> run() const {
        auto records = read_jsonl<GenerationRecord>(in);
        std::vector<ConsistentSample> samples;
        std::size_t dropped = 0;
        for (const GenerationRecord& record : records) {
            try {
                VoteResult vote = majority_vote(record);
                auto kept = keep_rationales(record, vote);
                samples.insert(samples.end(), kept.begin(), kept.end());
            } catch (const NoParseableAnswerError& e) {
                ++dropped;
                std::cerr << "dropped " << record.question.id << ": no parseable answer\n";
            }
        }
        if (u_star >= 0.0) samples = entropy_filter(samples, u_star);
        write_jsonl(samples, out);
        std::cerr << "kept " << samples.size() << " samples from " << records.size()
                  << " questions (" << dropped << " unparseable)\n";
        std::vector<fs::path> outputs{out};
        emit_manifest("vote", params(), {in}, outputs, out);
        return outputs;
    }
};

struct ScoreStage {
    RunConfig cfg;
    std::string model;
    std::string in;
    std::string valid;
    std::string out;

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()},
                            {"model", model},
                            {"in", in},
                            {"valid", valid},
                            {"out", out}};
    }

    static ScoreStage from_params(const ordered_json& j) {
        ScoreStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.model = j.at("model").get<std::string>();
        s.in = j.at("in").get<std::string>();
        s.valid = j.at("valid").get<std::string>();
        s.out = j.at("out").get<std::string>();
        return s;
    }

    fs::path summary_path() const { return fs::path(out).concat(".valid_summary.json"); }

    void remap(const fs::path& dir) { out = remap_into(out, dir).string(); }

    std::vector<fs::path> run() const {
        auto backend = make_backend(cfg, model);
        PromptTemplate prompt = load_template(cfg);
        auto pool = read_jsonl<ConsistentSample>(in);
        auto valid_samples = read_jsonl<ValidSample>(valid);
        ValidSetSummary summary = summarize_valid(score_batch(*backend, prompt, valid_samples));
        auto scored = score_pool(pool, summary, *backend, prompt);
        write_jsonl(scored, out);
        write_valid_summary(summary, summary_path());
        std::cerr << "scored " << scored.size() << " samples; valid mean "
                  << format_double(summary.mean) << ", stddev " << format_double(summary.stddev)
                  << "\n";

        std::vector<fs::path> inputs{in, valid};
        if (!model.empty() && cfg.backend == "toy") inputs.push_back(model);
        if (cfg.template_path && !cfg.template_path->empty())
            inputs.push_back(*cfg.template_path);
        std::vector<fs::path> outputs{out, summary_path()};
        emit_manifest("score", params(), inputs, outputs, out);
        return outputs;
    }
};

struct FilterStage {
    std::string in;
    std::string out;
    PolicyFlags policy;

    ordered_json params() const {
        return ordered_json{{"in", in}, {"out", out}, {"policy", policy.to_json()}};
    }

    static FilterStage from_params(const ordered_json& j) {
        FilterStage s;
        s.in = j.at("in").get<std::string>();
        s.out = j.at("out").get<std::string>();
        s.policy = PolicyFlags::from_json(j.at("policy"));
        return s;
    }

    void remap(const fs::path& dir) { out = remap_into(out, dir).string(); }

    std::vector<fs::path> run() const {
        auto pool = read_jsonl<ScoredSample>(in);
        CuratedSet curated = curate(pool, policy.resolve());
        write_curated_jsonl(curated, out);
        std::cerr << "kept " << curated.kept_count() << " of " << curated.samples.size();
        if (curated.sigma) std::cerr << " (sigma " << format_double(*curated.sigma) << ")";
        std::cerr << "\n";
        std::vector<fs::path> outputs{out, metadata_path_for(out)};
        emit_manifest("filter", params(), {in}, outputs, out);
        return outputs;
    }
};

struct TrainStage {
    RunConfig cfg;
    std::string in;
    std::string model_in;
    std::string model_out;
    int epochs = 1;
    double mix = 1.0;

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()}, {"in", in},     {"model_in", model_in},
                            {"model_out", model_out},  {"epochs", epochs}, {"mix", mix}};
    }

    static TrainStage from_params(const ordered_json& j) {
        TrainStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.in = j.at("in").get<std::string>();
        s.model_in = j.at("model_in").get<std::string>();
        s.model_out = j.at("model_out").get<std::string>();
        s.epochs = j.at("epochs").get<int>();
        s.mix = j.at("mix").get<double>();
        return s;
    }

    void remap(const fs::path& dir) { model_out = remap_into(model_out, dir).string(); }

    std::vector<fs::path> run() const {
        ToyLanguageModel model = ToyLanguageModel::load(model_in);
        PromptTemplate prompt = load_template(cfg);
        CuratedSet curated = read_curated_jsonl(in, metadata_path_for(in));
        ToyBackend before(model, cfg.toy.max_tokens);
        double loss_before = training_loss(curated, before, prompt);
        ToyLanguageModel tuned = fine_tune(model, curated, epochs, mix, prompt);
        ToyBackend after(tuned, cfg.toy.max_tokens);
        double loss_after = training_loss(curated, after, prompt);
        tuned.save(model_out);
        std::cerr << "training loss " << format_double(loss_before) << " -> "
                  << format_double(loss_after) << "\n";
        std::vector<fs::path> outputs{model_out};
        emit_manifest("train", params(), {in, metadata_path_for(in), model_in}, outputs,
                      model_out);
        return outputs;
    }
};

struct ExportStage {
    RunConfig cfg;
    std::string in;
    std::string out;
    std::string format = "sft_jsonl";
    std::string valid_summary; // optional sidecar from the score stage

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()},
                            {"in", in},
                            {"out", out},
                            {"format", format},
                            {"valid_summary", valid_summary}};
    }

    static ExportStage from_params(const ordered_json& j) {
        ExportStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.in = j.at("in").get<std::string>();
        s.out = j.at("out").get<std::string>();
        s.format = j.at("format").get<std::string>();
        s.valid_summary = j.at("valid_summary").get<std::string>();
        return s;
    }

    void remap(const fs::path& dir) { out = remap_into(out, dir).string(); }

    std::vector<fs::path> run() const {
        PromptTemplate prompt = load_template(cfg);
        CuratedSet curated = read_curated_jsonl(in, metadata_path_for(in));
        std::optional<ValidSetSummary> summary;
        if (!valid_summary.empty()) summary = read_valid_summary(valid_summary);
        export_curated(curated, export_format_from_string(format), out, prompt, summary);
        std::cerr << "exported " << curated.kept_count() << " samples -> " << out << "\n";

        std::vector<fs::path> inputs{in, metadata_path_for(in)};
        if (!valid_summary.empty()) inputs.push_back(valid_summary);
        std::vector<fs::path> outputs{out, metadata_path_for(out)};
        emit_manifest("export", params(), inputs, outputs, out);
        return outputs;
    }
};

struct AnalyzeStage {
    RunConfig cfg;
    std::string report; // ksweep | distribution | orthogonality | density |
                        // contamination | stability
    std::string model;
    std::string in;   // scored pool
    std::string out;  // csv
    std::string gold;
    std::string valid;         // valid samples (contamination, stability)
    std::string valid_summary; // distribution
    std::vector<std::string> pools; // name=path pairs for distribution
    std::string ks = "10,20,30,40,50,60,70,80,90,100";
    std::string u_stars = "0.2,0.4,0.6,0.8,1";
    std::string boundaries = "1,1.1,1.3,1.5,2";
    std::string sizes = "25,100,400";
    std::string kinds = "redundant,jumping,spurious";
    double bandwidth = 0.0;
    int grid = 256;
    int bins = 20;
    int trials = 200;
    double rate = 0.3;
    std::uint64_t seed = 0;
    PolicyFlags policy;

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()},
                            {"report", report},
                            {"model", model},
                            {"in", in},
                            {"out", out},
                            {"gold", gold},
                            {"valid", valid},
                            {"valid_summary", valid_summary},
                            {"pools", pools},
                            {"ks", ks},
                            {"u_stars", u_stars},
                            {"boundaries", boundaries},
                            {"sizes", sizes},
                            {"kinds", kinds},
                            {"bandwidth", bandwidth},
                            {"grid", grid},
                            {"bins", bins},
                            {"trials", trials},
                            {"rate", rate},
                            {"seed", seed},
                            {"policy", policy.to_json()}};
    }

    static AnalyzeStage from_params(const ordered_json& j) {
        AnalyzeStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.report = j.at("report").get<std::string>();
        s.model = j.at("model").get<std::string>();
        s.in = j.at("in").get<std::string>();
        s.out = j.at("out").get<std::string>();
        s.gold = j.at("gold").get<std::string>();
        s.valid = j.at("valid").get<std::string>();
        s.valid_summary = j.at("valid_summary").get<std::string>();
        s.pools = j.at("pools").get<std::vector<std::string>>();
        s.ks = j.at("ks").get<std::string>();
        s.u_stars = j.at("u_stars").get<std::string>();
        s.boundaries = j.at("boundaries").get<std::string>();
        s.sizes = j.at("sizes").get<std::string>();
        s.kinds = j.at("kinds").get<std::string>();
        s.bandwidth = j.at("bandwidth").get<double>();
        s.grid = j.at("grid").get<int>();
        s.bins = j.at("bins").get<int>();
        s.trials = j.at("trials").get<int>();
        s.rate = j.at("rate").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.policy = PolicyFlags::from_json(j.at("policy"));
        return s;
    }

    void remap(const fs::path& dir) { out = remap_into(out, dir).string(); }

    std::vector<fs::path> run() const {
        std::vector<fs::path> inputs;
        std::vector<fs::path> extra_outputs;
        if (report == "ksweep") {
            auto pool = read_jsonl<ScoredSample>(in);
            write_ksweep_csv(k_sweep(pool, parse_double_list(ks, "--ks")), out);
            inputs = {in};
        } else if (report == "distribution") {
            ValidSetSummary summary = read_valid_summary(valid_summary);
            std::vector<std::pair<std::string, std::vector<ScoredSample>>> named;
            inputs.push_back(valid_summary);
            for (const std::string& entry : pools) {
                std::size_t eq = entry.find('=');
                if (eq == std::string::npos)
                    throw Error(ExitCode::precondition, "--pool expects name=path");
                named.emplace_back(entry.substr(0, eq),
                                   read_jsonl<ScoredSample>(entry.substr(eq + 1)));
                inputs.push_back(entry.substr(eq + 1));
            }
            write_distribution_csv(
                loss_distribution_report(summary, named, static_cast<std::size_t>(bins)), out);
        } else if (report == "orthogonality") {
            auto pool = read_jsonl<ScoredSample>(in);
            write_orthogonality_csv(
                orthogonality_report(pool, read_gold(gold),
                                     parse_double_list(boundaries, "--boundaries")),
                out);
            inputs = {in, gold};
        } else if (report == "density") {
            auto pool = read_jsonl<ScoredSample>(in);
            auto density = dsweight_density(pool, parse_double_list(u_stars, "--u-stars"),
                                            bandwidth, static_cast<std::size_t>(grid));
            write_density_csv(density, out);
            write_density_metadata(density, bandwidth, metadata_path_for(out));
            extra_outputs.push_back(metadata_path_for(out));
            inputs = {in};
        } else if (report == "contamination") {
            auto backend = make_backend(cfg, model);
            PromptTemplate prompt = load_template(cfg);
            auto clean = read_jsonl<ValidSample>(in);
            std::vector<SyntheticSample> task;
            for (const ValidSample& v : clean) task.push_back({v.question, v.rationale, v.answer});
            auto valid_samples = read_jsonl<ValidSample>(valid);
            ValidSetSummary summary =
                summarize_valid(score_batch(*backend, prompt, valid_samples));
            std::vector<ShiftKind> kind_list;
            std::stringstream ss(kinds);
            std::string item;
            while (std::getline(ss, item, ',')) kind_list.push_back(shift_kind_from_string(item));
            auto report_rows = contamination_eval(task, kind_list, rate, policy.resolve(),
                                                  *backend, prompt, summary, seed);
            write_contamination_csv(report_rows, out);
            for (const ContaminationRow& row : report_rows.rows)
                std::cerr << to_string(row.kind) << ": recall "
                          << (row.recall ? format_double(*row.recall) : "null") << ", precision "
                          << (row.precision ? format_double(*row.precision) : "null") << "\n";
            inputs = {in, valid};
            if (!model.empty() && cfg.backend == "toy") inputs.push_back(model);
        } else if (report == "stability") {
            auto backend = make_backend(cfg, model);
            PromptTemplate prompt = load_template(cfg);
            auto pool = read_jsonl<ValidSample>(valid);
            StabilityReport rep = sample_mean_stability(
                pool, *backend, prompt, parse_size_list(sizes, "--sizes"), trials, seed);
            write_stability_csv(rep, out);
            std::cerr << "reference point: " << StabilityReport::reference_line() << "\n";
            inputs = {valid};
            if (!model.empty() && cfg.backend == "toy") inputs.push_back(model);
        } else {
            throw Error(ExitCode::precondition, "unknown report: " + report);
        }
        if (cfg.template_path && !cfg.template_path->empty())
            inputs.push_back(*cfg.template_path);
        std::vector<fs::path> outputs{out};
        outputs.insert(outputs.end(), extra_outputs.begin(), extra_outputs.end());
        emit_manifest("analyze", params(), inputs, outputs, out);
        return outputs;
    }
};

struct LoopStage {
    RunConfig cfg;
    std::string model; // initial model
    std::string questions;
    std::string valid;
    std::string eval; // valid-schema file; question + answer used
    std::string out;  // loop.csv
    std::string checkpoint_dir;
    std::string resume_from; // checkpoint model
    int start_iteration = 1;
    int iterations = 3;
    int m = 15;
    double temperature = 1.1;
    int epochs = 1;
    double mix = 1.0;
    std::uint64_t seed = 0;
    PolicyFlags policy;

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()},
                            {"model", model},
                            {"questions", questions},
                            {"valid", valid},
                            {"eval", eval},
                            {"out", out},
                            {"checkpoint_dir", checkpoint_dir},
                            {"resume_from", resume_from},
                            {"start_iteration", start_iteration},
                            {"iterations", iterations},
                            {"m", m},
                            {"temperature", temperature},
                            {"epochs", epochs},
                            {"mix", mix},
                            {"seed", seed},
                            {"policy", policy.to_json()}};
    }

    static LoopStage from_params(const ordered_json& j) {
        LoopStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.model = j.at("model").get<std::string>();
        s.questions = j.at("questions").get<std::string>();
        s.valid = j.at("valid").get<std::string>();
        s.eval = j.at("eval").get<std::string>();
        s.out = j.at("out").get<std::string>();
        s.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
        s.resume_from = j.at("resume_from").get<std::string>();
        s.start_iteration = j.at("start_iteration").get<int>();
        s.iterations = j.at("iterations").get<int>();
        s.m = j.at("m").get<int>();
        s.temperature = j.at("temperature").get<double>();
        s.epochs = j.at("epochs").get<int>();
        s.mix = j.at("mix").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.policy = PolicyFlags::from_json(j.at("policy"));
        return s;
    }

    void remap(const fs::path& dir) {
        out = remap_into(out, dir).string();
        if (!checkpoint_dir.empty()) checkpoint_dir = (dir / "checkpoints").string();
    }

    std::vector<fs::path> run() const {
        ToyLanguageModel initial = ToyLanguageModel::load(model);
        PromptTemplate prompt = load_template(cfg);
        auto qs = read_jsonl<Question>(questions);
        auto valid_samples = read_jsonl<ValidSample>(valid);
        auto eval_samples = read_jsonl<ValidSample>(eval);
        std::vector<EvalItem> eval_items;
        for (const ValidSample& v : eval_samples) eval_items.push_back({v.question, v.answer});

        LoopOptions options;
        options.m = m;
        options.temperature = temperature;
        options.epochs = epochs;
        options.mix = mix;
        options.max_tokens = cfg.toy.max_tokens;

        std::optional<ToyLanguageModel> resume_model;
        if (!resume_from.empty()) resume_model = ToyLanguageModel::load(resume_from);

        std::vector<fs::path> outputs{out};
        LoopCheckpointFn checkpoint;
        if (!checkpoint_dir.empty()) {
            fs::create_directories(checkpoint_dir);
            checkpoint = [&](int iter, const ToyLanguageModel& m_out, const LoopMetrics& row) {
                char name[32];
                std::snprintf(name, sizeof(name), "model_iter_%03d.json", iter);
                fs::path p = fs::path(checkpoint_dir) / name;
                m_out.save(p);
                outputs.push_back(p);
                std::cerr << "iteration " << iter << ": accuracy " << format_double(row.accuracy)
                          << ", kept " << format_double(row.kept_fraction) << "\n";
            };
        }

        auto metrics = self_consuming_loop(initial, qs, valid_samples, eval_items,
                                           policy.resolve(), iterations, seed, prompt, options,
                                           start_iteration,
                                           resume_model ? &*resume_model : nullptr, checkpoint);
        write_loop_csv(metrics, out);

        std::vector<fs::path> inputs{model, questions, valid, eval};
        if (!resume_from.empty()) inputs.push_back(resume_from);
        if (cfg.template_path && !cfg.template_path->empty())
            inputs.push_back(*cfg.template_path);
        emit_manifest("loop", params(), inputs, outputs, out);
        return outputs;
    }
};

struct SynthStage {
    RunConfig cfg;
    std::string out_dir = "fixture";
    std::size_t questions = 100;
    std::size_t corpus = 300;
    std::size_t valid = 60;
    std::size_t eval = 60;
    std::size_t clean = 200;
    std::uint64_t seed = 0;

    ordered_json params() const {
        return ordered_json{{"config", cfg.to_json()}, {"out_dir", out_dir},
                            {"questions", questions},  {"corpus", corpus},
                            {"valid", valid},          {"eval", eval},
                            {"clean", clean},          {"seed", seed}};
    }

    static SynthStage from_params(const ordered_json& j) {
        SynthStage s;
        s.cfg = RunConfig::from_json(j.at("config"));
        s.out_dir = j.at("out_dir").get<std::string>();
        s.questions = j.at("questions").get<std::size_t>();
        s.corpus = j.at("corpus").get<std::size_t>();
        s.valid = j.at("valid").get<std::size_t>();
        s.eval = j.at("eval").get<std::size_t>();
        s.clean = j.at("clean").get<std::size_t>();
        s.seed = j.at("seed").get<std::uint64_t>();
        return s;
    }

    void remap(const fs::path& dir) { out_dir = dir.string(); }

    std::vector<fs::path> run() const {
        fs::create_directories(out_dir);
        fs::path dir(out_dir);

        auto q_split = make_synthetic_task(questions, derive_seed(seed, "questions"), "q");
        auto corpus_split = make_synthetic_task(corpus, derive_seed(seed, "corpus"), "c");
        auto valid_split = make_synthetic_task(valid, derive_seed(seed, "valid"), "v");
        auto eval_split = make_synthetic_task(eval, derive_seed(seed, "eval"), "e");
        auto clean_split = make_synthetic_task(clean, derive_seed(seed, "clean"), "p");

        PromptTemplate prompt = synthetic_prompt_template();
        ToyLanguageModel model =
            train_synthetic_model(corpus_split, cfg.toy.order, cfg.toy.alpha, prompt);

        write_jsonl(synthetic_questions(q_split), dir / "questions.jsonl");
        write_jsonl(synthetic_valid_samples(valid_split), dir / "valid.jsonl");
        write_jsonl(synthetic_valid_samples(eval_split), dir / "eval.jsonl");
        write_jsonl(synthetic_valid_samples(clean_split), dir / "clean.jsonl");
        std::map<std::string, std::string> gold = synthetic_gold(q_split);
        for (const auto& [id, answer] : synthetic_gold(eval_split)) gold.emplace(id, answer);
        write_gold(gold, dir / "gold.jsonl");
        model.save(dir / "model.json");
        prompt.save(dir / "template.json");

        std::cerr << "fixture written to " << out_dir << "\n";
        std::vector<fs::path> outputs{dir / "questions.jsonl", dir / "valid.jsonl",
                                      dir / "eval.jsonl",      dir / "clean.jsonl",
                                      dir / "gold.jsonl",      dir / "model.json",
                                      dir / "template.json"};
        emit_manifest("synth", params(), {}, outputs, dir / "fixture");
        return outputs;
    }
};

int run_replay(const std::string& manifest_file, std::string out_dir_flag) {
    RunManifest manifest = RunManifest::load(manifest_file);

    for (const FileHash& input : manifest.inputs) {
        if (!fs::exists(input.path))
            throw Error(ExitCode::precondition, "replay input missing: " + input.path);
        if (sha256_file(input.path) != input.sha256)
            throw Error(ExitCode::precondition, "replay input changed: " + input.path);
    }

    fs::path out_dir = out_dir_flag.empty()
                           ? fs::path(manifest_file).parent_path() / "replay"
                           : fs::path(out_dir_flag);
    fs::create_directories(out_dir);

    const std::string& cmd = manifest.command;
    std::vector<fs::path> replayed;
    if (cmd == "generate") {
        GenerateStage s = GenerateStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "vote") {
        VoteStage s = VoteStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "score") {
        ScoreStage s = ScoreStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "filter") {
        FilterStage s = FilterStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "train") {
        TrainStage s = TrainStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "export") {
        ExportStage s = ExportStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "analyze") {
        AnalyzeStage s = AnalyzeStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "loop") {
        LoopStage s = LoopStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else if (cmd == "synth") {
        SynthStage s = SynthStage::from_params(manifest.params);
        s.remap(out_dir);
        replayed = s.run();
    } else {
        throw Error(ExitCode::precondition, "cannot replay command: " + cmd);
    }

    // outputs are emitted in a fixed order per stage, so the replayed list
    // pairs positionally with the recorded hashes
    if (replayed.size() != manifest.outputs.size())
        throw Error(ExitCode::internal, "replay produced a different number of outputs");
    bool all_ok = true;
    for (std::size_t i = 0; i < replayed.size(); ++i) {
        bool ok = fs::exists(replayed[i]) &&
                  sha256_file(replayed[i]) == manifest.outputs[i].sha256;
        std::cout << "replay " << replayed[i].string() << ": " << (ok ? "ok" : "mismatch")
                  << "\n";
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : static_cast<int>(ExitCode::internal);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"IWSI data-curation pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());

    // generate
    auto* c_gen = app.add_subcommand("generate", "sample candidate answers for questions");
    ConfigFlags gen_cfg;
    GenerateStage gen;
    gen_cfg.add_to(*c_gen);
    c_gen->add_option("--questions", gen.questions, "questions JSONL")->required();
    c_gen->add_option("--out", gen.out, "generations JSONL")->required();
    c_gen->add_option("--m", gen.m, "candidates per question");
    c_gen->add_option("--temperature", gen.temperature, "sampling temperature");
    c_gen->add_option("--seed", gen.seed, "RNG seed")->required();

    // vote
    auto* c_vote = app.add_subcommand("vote", "majority-vote candidates into training triples");
    VoteStage vote;
    c_vote->add_option("--in", vote.in, "generations JSONL")->required();
    c_vote->add_option("--out", vote.out, "consistent JSONL")->required();
    c_vote->add_option("--u-star", vote.u_star, "entropy filter threshold (omit to disable)");

    // score
    auto* c_score = app.add_subcommand("score", "attach losses and DS weights");
    ConfigFlags score_cfg;
    ScoreStage score;
    score_cfg.add_to(*c_score);
    c_score->add_option("--in", score.in, "consistent JSONL")->required();
    c_score->add_option("--valid", score.valid, "valid samples JSONL")->required();
    c_score->add_option("--out", score.out, "scored JSONL")->required();

    // filter
    auto* c_filter = app.add_subcommand("filter", "apply a curation policy");
    FilterStage filter;
    c_filter->add_option("--in", filter.in, "scored JSONL")->required();
    c_filter->add_option("--out", filter.out, "curated JSONL")->required();
    filter.policy.add_to(*c_filter);

    // train
    auto* c_train = app.add_subcommand("train", "fine-tune the toy model on a curated set");
    ConfigFlags train_cfg;
    TrainStage train;
    train_cfg.add_to(*c_train);
    c_train->add_option("--in", train.in, "curated JSONL")->required();
    c_train->add_option("--model-in", train.model_in, "initial toy model")->required();
    c_train->add_option("--model-out", train.model_out, "trained toy model")->required();
    c_train->add_option("--epochs", train.epochs, "training epochs");
    c_train->add_option("--mix", train.mix, "update mix in (0,1]");

    // export
    auto* c_export = app.add_subcommand("export", "write curated data for an external trainer");
    ConfigFlags export_cfg;
    ExportStage exp;
    export_cfg.add_to(*c_export);
    c_export->add_option("--in", exp.in, "curated JSONL")->required();
    c_export->add_option("--out", exp.out, "export JSONL")->required();
    c_export->add_option("--format", exp.format, "sft_jsonl | weighted_jsonl");
    c_export->add_option("--valid-summary", exp.valid_summary,
                         "valid summary sidecar to embed in metadata");

    // analyze
    auto* c_analyze = app.add_subcommand("analyze", "emit an analysis CSV");
    ConfigFlags analyze_cfg;
    AnalyzeStage analyze;
    analyze_cfg.add_to(*c_analyze);
    c_analyze->add_option("--report", analyze.report,
                          "ksweep | distribution | orthogonality | density | contamination | "
                          "stability")
        ->required();
    c_analyze->add_option("--in", analyze.in, "scored JSONL (or clean pool for contamination)");
    c_analyze->add_option("--out", analyze.out, "output CSV")->required();
    c_analyze->add_option("--gold", analyze.gold, "gold answers JSONL ({id,answer})");
    c_analyze->add_option("--valid", analyze.valid, "valid samples JSONL");
    c_analyze->add_option("--valid-summary", analyze.valid_summary, "valid summary JSON");
    c_analyze->add_option("--pool", analyze.pools, "name=path scored pools (distribution)");
    c_analyze->add_option("--ks", analyze.ks, "comma-separated k values");
    c_analyze->add_option("--u-stars", analyze.u_stars, "comma-separated uncertainty thresholds");
    c_analyze->add_option("--boundaries", analyze.boundaries, "DS-weight interval boundaries");
    c_analyze->add_option("--sizes", analyze.sizes, "valid subset sizes (stability)");
    c_analyze->add_option("--kinds", analyze.kinds, "contamination kinds");
    c_analyze->add_option("--bandwidth", analyze.bandwidth, "KDE bandwidth (0 = Silverman)");
    c_analyze->add_option("--grid", analyze.grid, "KDE grid points");
    c_analyze->add_option("--bins", analyze.bins, "histogram bins (distribution)");
    c_analyze->add_option("--trials", analyze.trials, "resample trials (stability)");
    c_analyze->add_option("--rate", analyze.rate, "contamination rate in (0,1)");
    c_analyze->add_option("--seed", analyze.seed, "RNG seed (contamination, stability)");
    analyze.policy.add_to(*c_analyze);

    // loop
    auto* c_loop = app.add_subcommand("loop", "self-consuming training loop");
    ConfigFlags loop_cfg;
    LoopStage loop;
    loop_cfg.add_to(*c_loop);
    c_loop->add_option("--questions", loop.questions, "questions JSONL")->required();
    c_loop->add_option("--valid", loop.valid, "valid samples JSONL")->required();
    c_loop->add_option("--eval", loop.eval, "held-out eval JSONL (valid schema)")->required();
    c_loop->add_option("--out", loop.out, "loop metrics CSV")->required();
    c_loop->add_option("--checkpoint-dir", loop.checkpoint_dir, "per-iteration model dumps");
    c_loop->add_option("--resume-from", loop.resume_from, "checkpoint model to resume from");
    c_loop->add_option("--start-iteration", loop.start_iteration, "first iteration to run");
    c_loop->add_option("--iterations", loop.iterations, "number of iterations");
    c_loop->add_option("--m", loop.m, "candidates per question");
    c_loop->add_option("--temperature", loop.temperature, "sampling temperature");
    c_loop->add_option("--epochs", loop.epochs, "training epochs per iteration");
    c_loop->add_option("--mix", loop.mix, "update mix in (0,1]");
    c_loop->add_option("--seed", loop.seed, "RNG seed")->required();
    loop.policy.add_to(*c_loop);

    // synth
    auto* c_synth = app.add_subcommand("synth", "write a synthetic task fixture");
    ConfigFlags synth_cfg;
    SynthStage synth;
    synth_cfg.add_to(*c_synth);
    c_synth->add_option("--out-dir", synth.out_dir, "fixture directory");
    c_synth->add_option("--questions", synth.questions, "pipeline questions");
    c_synth->add_option("--corpus", synth.corpus, "model training texts");
    c_synth->add_option("--valid", synth.valid, "valid samples");
    c_synth->add_option("--eval", synth.eval, "held-out eval samples");
    c_synth->add_option("--clean", synth.clean, "clean pool size (contamination)");
    c_synth->add_option("--seed", synth.seed, "RNG seed")->required();

    // replay
    auto* c_replay = app.add_subcommand("replay", "re-run a stage from its manifest");
    std::string replay_manifest;
    std::string replay_out_dir;
    c_replay->add_option("manifest", replay_manifest, "manifest JSON")->required();
    c_replay->add_option("--out-dir", replay_out_dir, "directory for replayed outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::precondition);
    }

    try {
        if (c_gen->parsed()) {
            gen.cfg = gen_cfg.resolve();
            gen.model = gen_cfg.model;
            gen.run();
        } else if (c_vote->parsed()) {
            vote.run();
        } else if (c_score->parsed()) {
            score.cfg = score_cfg.resolve();
            score.model = score_cfg.model;
            score.run();
        } else if (c_filter->parsed()) {
            filter.run();
        } else if (c_train->parsed()) {
            train.cfg = train_cfg.resolve();
            train.run();
        } else if (c_export->parsed()) {
            exp.cfg = export_cfg.resolve();
            exp.run();
        } else if (c_analyze->parsed()) {
            analyze.cfg = analyze_cfg.resolve();
            analyze.model = analyze_cfg.model;
            if ((analyze.report == "stability" || analyze.report == "contamination") &&
                c_analyze->count("--seed") == 0)
                throw Error(ExitCode::precondition,
                            "--seed is mandatory for the " + analyze.report + " report");
            analyze.run();
        } else if (c_loop->parsed()) {
            loop.cfg = loop_cfg.resolve();
            loop.model = loop_cfg.model;
            loop.run();
        } else if (c_synth->parsed()) {
            synth.cfg = synth_cfg.resolve();
            synth.run();
        } else if (c_replay->parsed()) {
            return run_replay(replay_manifest, replay_out_dir);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::internal);
    }
}

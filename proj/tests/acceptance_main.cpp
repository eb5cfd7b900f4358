// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Criteria 9 and 10 drive the installed
// CLI binary (path in $IWSI_BIN).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "iwsi/analysis.hpp"
#include "iwsi/backend.hpp"
#include "iwsi/consistency.hpp"
#include "iwsi/curator.hpp"
#include "iwsi/dsweight.hpp"
#include "iwsi/manifest.hpp"
#include "iwsi/records.hpp"
#include "iwsi/rng.hpp"
#include "iwsi/synthetic.hpp"
#include "iwsi/toy_model.hpp"

namespace fs = std::filesystem;
using namespace iwsi;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw CheckFailure(msg);
}

void require_close(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol))
        throw CheckFailure(what + ": got " + std::to_string(got) + ", want " +
                           std::to_string(want) + " +/- " + std::to_string(tol));
}

ScoredSample pool_sample(double loss, double mean, double uncertainty = 0.0) {
    ScoredSample s;
    s.sample.question = {"q", "t"};
    s.sample.rationale = "r";
    s.sample.voted_answer = "1";
    s.sample.vote_count = 1;
    s.sample.num_candidates = 1;
    s.sample.uncertainty = uncertainty;
    s.loss = loss;
    s.naive_weight = mean / loss;
    s.ds_weight = ds_weight(s.naive_weight);
    return s;
}

// ------------------------------------------------------------ criterion 1

void criterion_weight_invariants() {
    Rng rng(1001);
    for (int pool = 0; pool < 10000; ++pool) {
        std::size_t n = 1 + rng.uniform_index(24);
        double mean = 0.5 + 4.0 * rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            double loss = std::exp((rng.uniform() * 2.0 - 1.0) * 3.0) * mean;
            double naive = mean / loss;
            double ds = ds_weight(naive);
            require(ds >= 1.0, "ds_weight fell below 1");
            // double reciprocals round, so arbitrary pairs agree to <= 2 ulp
            double mirrored = ds_weight(1.0 / naive);
            require(std::abs(mirrored - ds) <= 2.0 * std::abs(ds) * 0x1.0p-52,
                    "ds_weight(w) vs ds_weight(1/w) beyond 2 ulp");
        }
        // identity point: loss equal to the valid mean
        require(std::abs(ds_weight(mean / mean) - 1.0) <= 1e-12,
                "loss == valid mean must give ds_weight 1");
    }
    // exact symmetry on pairs whose reciprocal is exactly representable
    for (int e = -60; e <= 60; ++e) {
        double w = std::ldexp(1.0, e);
        require(ds_weight(w) == ds_weight(1.0 / w), "dyadic symmetry violated");
    }
    for (int i = 0; i < 1000; ++i) {
        double w = std::ldexp(1.0, static_cast<int>(rng.uniform_index(120)) - 60);
        require(ds_weight(w) == ds_weight(1.0 / w), "dyadic symmetry violated");
    }
}

// ------------------------------------------------------------ criterion 2

void criterion_band_property() {
    Rng rng(1002);
    for (int trial = 0; trial < 2000; ++trial) {
        std::size_t n = 2 + rng.uniform_index(40);
        double mean = 0.5 + 4.0 * rng.uniform();
        std::vector<ScoredSample> pool;
        for (std::size_t i = 0; i < n; ++i)
            pool.push_back(pool_sample(std::exp((rng.uniform() * 2.0 - 1.0) * 2.5) * mean, mean));

        CurationPolicy policy;
        policy.mode = CurationMode::iwsi;
        policy.k = 1.0 + 99.0 * rng.uniform();
        CuratedSet curated = curate(pool, policy);
        double sigma = *curated.sigma;

        for (const CuratedSample& s : curated.samples) {
            bool kept = s.training_weight > 0.0;
            double lo = mean / sigma;
            double hi = mean * sigma;
            bool in_band =
                s.sample.loss >= lo * (1.0 - 1e-12) && s.sample.loss <= hi * (1.0 + 1e-12);
            require(kept == in_band, "band property violated");
        }
    }
}

// ------------------------------------------------------------ criterion 3

void criterion_loss_reductions() {
    Rng rng(1003);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.uniform_index(30);
        std::vector<ScoredSample> pool;
        std::vector<double> losses;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double loss = 0.1 + 5.0 * rng.uniform();
            ScoredSample s = pool_sample(loss, loss); // naive weight exactly 1
            s.naive_weight = 1.0 + 2.0 * rng.uniform();
            s.ds_weight = s.naive_weight;
            pool.push_back(s);
            losses.push_back(loss);
            mean += loss;
        }
        mean /= static_cast<double>(n);

        CurationPolicy k100;
        k100.mode = CurationMode::iwsi;
        k100.k = 100.0;
        double lf = weighted_training_loss(curate(pool, k100), losses);

        CurationPolicy clip1;
        clip1.mode = CurationMode::iwsi_w;
        clip1.clip_c = 1.0; // naive weights are all >= 1, so every clip is 1
        double lw = weighted_training_loss(curate(pool, clip1), losses);

        require(std::abs(lf - mean) <= 1e-9, "iwsi k=100 loss differs from the plain mean");
        require(std::abs(lw - mean) <= 1e-9, "unit-weight iwsi_w loss differs from the plain mean");
        require(std::abs(lf - lw) <= 1e-9, "filtered and weighted losses disagree");
    }
}

// ------------------------------------------------------------ criterion 4

PercentileResult percentile_by_scan(const std::vector<double>& weights, double k) {
    std::vector<double> sorted = weights;
    std::sort(sorted.begin(), sorted.end());
    PercentileResult r;
    r.k = k;
    r.total = weights.size();
    for (double candidate : sorted) {
        std::size_t kept = 0;
        for (double w : weights)
            if (w <= candidate) ++kept;
        double target = k * static_cast<double>(weights.size());
        double tol = std::max(1e-9, target * 1e-12);
        if (static_cast<double>(kept) * 100.0 >= target - tol) {
            r.sigma = candidate;
            r.kept_count = kept;
            return r;
        }
    }
    r.sigma = sorted.back();
    r.kept_count = sorted.size();
    return r;
}

void criterion_percentile_oracle() {
    const std::vector<double> alphabet{1.0, 1.25, 1.5, 2.0, 3.0};
    const std::vector<double> ks{5.0,  10.0, 12.5, 20.0,      25.0, 100.0 / 3.0, 40.0, 50.0,
                                 60.0, 200.0 / 3.0, 70.0, 75.0, 80.0, 90.0,        99.0, 100.0};

    // every multiset of size <= 8 over the alphabet, as counts per symbol
    std::function<void(std::size_t, std::size_t, std::vector<double>&)> visit =
        [&](std::size_t symbol, std::size_t remaining, std::vector<double>& weights) {
            if (symbol == alphabet.size()) {
                if (weights.empty()) return;
                for (double k : ks) {
                    auto fast = percentile_threshold(weights, k);
                    auto slow = percentile_by_scan(weights, k);
                    require(fast.sigma == slow.sigma && fast.kept_count == slow.kept_count,
                            "percentile mismatch on exhaustive multiset");
                }
                return;
            }
            for (std::size_t take = 0; take <= remaining; ++take) {
                for (std::size_t i = 0; i < take; ++i) weights.push_back(alphabet[symbol]);
                visit(symbol + 1, remaining - take, weights);
                for (std::size_t i = 0; i < take; ++i) weights.pop_back();
            }
        };
    for (std::size_t size = 1; size <= 8; ++size) {
        std::vector<double> weights;
        visit(0, size, weights);
    }

    Rng rng(1004);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.uniform_index(400);
        std::vector<double> weights;
        for (std::size_t i = 0; i < n; ++i) weights.push_back(1.0 + 4.0 * rng.uniform());
        double k = 1.0 + 99.0 * rng.uniform();
        auto fast = percentile_threshold(weights, k);
        auto slow = percentile_by_scan(weights, k);
        require(fast.sigma == slow.sigma && fast.kept_count == slow.kept_count,
                "percentile mismatch on random pool");
    }
}

// ------------------------------------------------------------ criterion 5

void criterion_entropy_oracle() {
    for (int m = 1; m <= 6; ++m) {
        std::vector<int> digits(static_cast<std::size_t>(m), 0);
        for (;;) {
            std::vector<std::optional<std::string>> answers;
            std::map<std::string, int> hist;
            for (int j = 0; j < m; ++j) {
                int d = digits[static_cast<std::size_t>(j)];
                if (d == 6) {
                    answers.push_back(std::nullopt);
                } else {
                    std::string a(1, static_cast<char>('a' + d));
                    answers.push_back(a);
                    ++hist[a];
                }
            }

            double got = uncertainty(answers, m);
            require(got >= 0.0 && got <= 1.0, "uncertainty out of [0,1]");

            if (hist.empty()) {
                require(got == 1.0, "no parseable answer must give uncertainty 1");
            } else if (m == 1) {
                require(got == 0.0, "m == 1 with a parseable answer is unanimous");
            } else {
                double u = 0.0;
                for (const auto& [a, c] : hist) {
                    double p = static_cast<double>(c) / static_cast<double>(m);
                    u -= p * std::log(p);
                }
                u /= std::log(static_cast<double>(m));
                u = std::min(1.0, std::max(0.0, u));
                require(std::abs(got - u) <= 1e-9, "uncertainty differs from direct evaluation");
                bool unanimous = hist.size() == 1 && hist.begin()->second == m;
                require((got == 0.0) == unanimous, "zero uncertainty must mean unanimity");
            }

            int pos = m - 1;
            while (pos >= 0 && digits[static_cast<std::size_t>(pos)] == 6) {
                digits[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
            ++digits[static_cast<std::size_t>(pos)];
        }
    }
}

// ------------------------------------------------------------ criterion 6

void criterion_toy_model_oracle() {
    ToyLanguageModel::Counts counts;
    counts[""] = {{"a", 3.0}, {"b", 1.0}};
    auto hand = ToyLanguageModel::from_counts(1, 1.0, {"a", "b"}, counts);
    require_close(hand.sequence_nll("", "a"), -std::log(4.0 / 6.0), 1e-9, "hand oracle");

    auto uniform = ToyLanguageModel::from_counts(2, 1.0, {"t1", "t2", "t3", "t4", "t5", "t6", "t7"},
                                                 {});
    require_close(uniform.sequence_nll("ctx", "t1 t2 t3"), std::log(7.0), 1e-9, "uniform model");

    Rng rng(1006);
    const char* words[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    ToyLanguageModel model(3, 0.2, TokenizerMode::word);
    for (int i = 0; i < 80; ++i) {
        std::string text;
        int len = 2 + static_cast<int>(rng.uniform_index(9));
        for (int j = 0; j < len; ++j) {
            if (j) text += ' ';
            text += words[rng.uniform_index(8)];
        }
        model.accumulate(text, 0.25 + rng.uniform());
    }
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> ctx;
        int len = static_cast<int>(rng.uniform_index(4));
        for (int j = 0; j < len; ++j) ctx.emplace_back(words[rng.uniform_index(8)]);
        double total = 0.0;
        for (const auto& tok : model.vocabulary()) total += model.prob(ctx, tok);
        require_close(total, 1.0, 1e-9, "per-context probability sum");
    }
}

// ------------------------------------------------------------ criterion 7

// Frozen on the first oracle run of the reference fixture (seeds below);
// the fixed seed makes re-runs reproduce these to the last digit, and the
// +/- 0.02 window guards the freeze.
constexpr double kFrozenRecallRedundant = 1.0;
constexpr double kFrozenRecallJumping = 1.0;
constexpr double kFrozenRecallSpurious = 1.0;

void criterion_contamination_recall() {
    auto pool = make_synthetic_task(200, 7101, "p");
    auto valid_task = make_synthetic_task(100, 7102, "v");
    auto corpus = make_synthetic_task(1000, 7103, "c");
    PromptTemplate prompt = synthetic_prompt_template();
    ToyLanguageModel model = train_synthetic_model(corpus, 3, 0.02, prompt);
    ToyBackend backend(model, 160);
    ValidSetSummary valid =
        summarize_valid(score_batch(backend, prompt, synthetic_valid_samples(valid_task)));

    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 70.0;
    auto report = contamination_eval(
        pool, {ShiftKind::redundant, ShiftKind::jumping, ShiftKind::spurious}, 0.3, policy,
        backend, prompt, valid, 7104);

    double recall_redundant = 0.0, recall_jumping = 0.0, recall_spurious = 0.0;
    for (const ContaminationRow& row : report.rows) {
        require(row.recall.has_value(), "recall undefined on the reference fixture");
        switch (row.kind) {
            case ShiftKind::redundant: recall_redundant = *row.recall; break;
            case ShiftKind::jumping: recall_jumping = *row.recall; break;
            case ShiftKind::spurious: recall_spurious = *row.recall; break;
        }
    }
    std::cerr << "      contamination recall: redundant " << recall_redundant << ", jumping "
              << recall_jumping << ", spurious " << recall_spurious << "\n";

    require(recall_jumping >= 0.9, "jumping recall below 0.9");
    require(recall_spurious >= 0.9, "spurious recall below 0.9");
    require(recall_redundant >= 0.75, "redundant recall below 0.75");

    require(kFrozenRecallRedundant >= 0.0, "frozen recall values not pinned yet");
    require_close(recall_redundant, kFrozenRecallRedundant, 0.02, "redundant recall drifted");
    require_close(recall_jumping, kFrozenRecallJumping, 0.02, "jumping recall drifted");
    require_close(recall_spurious, kFrozenRecallSpurious, 0.02, "spurious recall drifted");
}

// ------------------------------------------------------------ criterion 8

void criterion_valid_stability() {
    auto pool_task = make_synthetic_task(1200, 8101, "s");
    auto corpus = make_synthetic_task(400, 8102, "c");
    PromptTemplate prompt = synthetic_prompt_template();
    ToyLanguageModel model = train_synthetic_model(corpus, 3, 0.05, prompt);
    ToyBackend backend(model, 160);

    auto report = sample_mean_stability(synthetic_valid_samples(pool_task), backend, prompt,
                                        {25, 100, 400}, 200, 8103);
    require(report.rows.size() == 3, "expected three sizes");
    double s25 = report.rows[0].empirical_std;
    double s100 = report.rows[1].empirical_std;
    double s400 = report.rows[2].empirical_std;
    require(s25 > s100 && s100 > s400, "empirical stddev must strictly decrease with N_v");

    double ratio = s25 / s100;
    require_close(ratio, 2.0, 0.6, "stddev ratio N_v=25 : N_v=100");

    std::cout << "      " << StabilityReport::reference_line() << "\n";
    require(StabilityReport::reference_value() == 0.41 / 100.0,
            "reference point must be 0.41/100");
    require(std::abs(StabilityReport::reference_value() - 4.1e-3) < 1e-15,
            "reference point must print as 4.1e-03");
}

// ------------------------------------------------------------ criteria 9/10

struct Cli {
    std::string bin;
    fs::path dir;

    int run(const std::string& args) const {
        std::string cmd = bin + " " + args + " >> " + (dir / "cli.log").string() + " 2>&1";
        return std::system(cmd.c_str());
    }
    std::string log() const {
        std::ifstream in(dir / "cli.log");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

Cli make_cli() {
    const char* bin = std::getenv("IWSI_BIN");
    if (bin == nullptr || *bin == '\0')
        throw CheckFailure("IWSI_BIN is not set; run through ctest or export it");
    Cli cli;
    cli.bin = bin;
    cli.dir = fs::temp_directory_path() /
              ("iwsi_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(cli.dir);
    return cli;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

void criterion_determinism_replay() {
    Cli cli = make_cli();
    fs::path d = cli.dir;
    std::string fix = (d / "fix").string();

    require(cli.run("synth --seed 901 --out-dir " + fix +
                    " --questions 20 --corpus 200 --valid 30 --eval 15 --clean 40") == 0,
            "synth failed:\n" + cli.log());

    auto stage = [&](const std::string& name, const std::string& args, const fs::path& out) {
        require(cli.run(args) == 0, name + " failed:\n" + cli.log());
        // byte-identical replay, outputs rebuilt in a fresh directory
        fs::path replay_dir = d / (name + "_replay");
        require(cli.run("replay " + manifest_path_for(out).string() + " --out-dir " +
                        replay_dir.string()) == 0,
                name + " replay mismatched:\n" + cli.log());
        fs::path replayed = replay_dir / out.filename();
        require(fs::exists(replayed), name + " replay produced no output");
        require(sha256_file(replayed) == sha256_file(out), name + " replay bytes differ");
    };

    fs::path gen = d / "gen.jsonl";
    stage("generate",
          "generate --questions " + fix + "/questions.jsonl --model " + fix +
              "/model.json --template " + fix + "/template.json --out " + gen.string() +
              " --m 5 --temperature 1.1 --seed 902",
          gen);

    // the toy path is bitwise reproducible end to end
    fs::path gen2 = d / "gen2.jsonl";
    require(cli.run("generate --questions " + fix + "/questions.jsonl --model " + fix +
                    "/model.json --template " + fix + "/template.json --out " + gen2.string() +
                    " --m 5 --temperature 1.1 --seed 902") == 0,
            "second generate failed");
    require(sha256_file(gen) == sha256_file(gen2), "same seed produced different generations");

    fs::path cons = d / "consistent.jsonl";
    stage("vote", "vote --in " + gen.string() + " --out " + cons.string(), cons);

    fs::path scored = d / "scored.jsonl";
    stage("score",
          "score --in " + cons.string() + " --valid " + fix + "/valid.jsonl --model " + fix +
              "/model.json --template " + fix + "/template.json --out " + scored.string(),
          scored);

    fs::path curated = d / "curated.jsonl";
    stage("filter", "filter --in " + scored.string() + " --out " + curated.string() + " --k 80",
          curated);

    fs::path tuned = d / "tuned_model.json";
    stage("train",
          "train --in " + curated.string() + " --model-in " + fix + "/model.json --template " +
              fix + "/template.json --model-out " + tuned.string(),
          tuned);

    fs::path exported = d / "export.jsonl";
    stage("export",
          "export --in " + curated.string() + " --out " + exported.string() +
              " --format weighted_jsonl",
          exported);

    fs::path loop_csv = d / "loop.csv";
    stage("loop",
          "loop --questions " + fix + "/questions.jsonl --valid " + fix + "/valid.jsonl --eval " +
              fix + "/eval.jsonl --model " + fix + "/model.json --template " + fix +
              "/template.json --iterations 3 --m 5 --seed 903 --k 80 --checkpoint-dir " +
              (d / "ckpt").string() + " --out " + loop_csv.string(),
          loop_csv);

    fs::path ksweep = d / "ksweep.csv";
    stage("analyze",
          "analyze --report ksweep --in " + scored.string() + " --out " + ksweep.string(),
          ksweep);

    fs::path stab = d / "stability.csv";
    stage("stability",
          "analyze --report stability --valid " + fix + "/valid.jsonl --model " + fix +
              "/model.json --template " + fix + "/template.json --sizes 10,20 --trials 40 "
              "--seed 904 --out " + stab.string(),
          stab);
}

void criterion_end_to_end_smoke() {
    Cli cli = make_cli();
    fs::path d = cli.dir;
    std::string fix = (d / "fix").string();

    require(cli.run("synth --seed 911 --out-dir " + fix +
                    " --questions 20 --corpus 200 --valid 30 --eval 10 --clean 30") == 0,
            "synth failed:\n" + cli.log());

    fs::path gen = d / "gen.jsonl";
    fs::path cons = d / "consistent.jsonl";
    fs::path scored = d / "scored.jsonl";
    fs::path curated = d / "curated.jsonl";
    fs::path tuned = d / "model_tuned.json";
    fs::path exported = d / "export.jsonl";

    require(cli.run("generate --questions " + fix + "/questions.jsonl --model " + fix +
                    "/model.json --template " + fix + "/template.json --out " + gen.string() +
                    " --seed 912") == 0,
            "generate failed:\n" + cli.log());
    require(cli.run("vote --in " + gen.string() + " --out " + cons.string()) == 0,
            "vote failed:\n" + cli.log());
    require(cli.run("score --in " + cons.string() + " --valid " + fix + "/valid.jsonl --model " +
                    fix + "/model.json --template " + fix + "/template.json --out " +
                    scored.string()) == 0,
            "score failed:\n" + cli.log());
    require(cli.run("filter --in " + scored.string() + " --out " + curated.string() +
                    " --mode iwsi --k 80") == 0,
            "filter failed:\n" + cli.log());
    require(cli.run("train --in " + curated.string() + " --model-in " + fix +
                    "/model.json --template " + fix + "/template.json --model-out " +
                    tuned.string()) == 0,
            "train failed:\n" + cli.log());
    require(cli.run("export --in " + curated.string() + " --out " + exported.string() +
                    " --format sft_jsonl --valid-summary " + scored.string() +
                    ".valid_summary.json") == 0,
            "export failed:\n" + cli.log());

    // generate defaults follow the stated m/T
    auto records = read_jsonl<GenerationRecord>(gen);
    require(!records.empty(), "no generation records");
    require(records.front().candidates.size() == 15, "default m must be 15");
    require(records.front().temperature == 1.1, "default temperature must be 1.1");

    CurationMetadata meta = CurationMetadata::load(metadata_path_for(exported));
    require(line_count(exported) == meta.kept_count, "export line count != kept_count");
    require(meta.valid_summary.has_value(), "export metadata misses the valid summary");

    // metadata sigma equals the percentile oracle over the scored pool
    auto pool = read_jsonl<ScoredSample>(scored);
    std::vector<double> weights;
    for (const auto& s : pool) weights.push_back(s.ds_weight);
    auto oracle = percentile_by_scan(weights, 80.0);
    require(meta.sigma.has_value(), "export metadata misses sigma");
    require(*meta.sigma == oracle.sigma, "metadata sigma != percentile oracle");

    std::size_t kept_by_weights = 0;
    for (double w : weights)
        if (w <= oracle.sigma) ++kept_by_weights;
    require(kept_by_weights == meta.kept_count, "kept count != oracle count");

    // a question file with zero questions passes through cleanly
    fs::path none = d / "none.jsonl";
    std::ofstream(none).close();
    fs::path gen_none = d / "gen_none.jsonl";
    require(cli.run("generate --questions " + none.string() + " --model " + fix +
                    "/model.json --out " + gen_none.string() + " --seed 913") == 0,
            "empty question file must exit 0");
    require(fs::exists(gen_none) && fs::file_size(gen_none) == 0,
            "empty question file must produce an empty output");

    // stable exit codes: 2 schema, 4 precondition
    auto exit_code = [](int status) { return WEXITSTATUS(status); };
    require(exit_code(cli.run("vote --in " + (d / "no_such.jsonl").string() + " --out " +
                              (d / "x.jsonl").string())) == 2,
            "missing input must exit 2");
    require(exit_code(cli.run("score --in " + cons.string() + " --valid " + none.string() +
                              " --model " + fix + "/model.json --out " +
                              (d / "x2.jsonl").string())) == 4,
            "empty valid set must exit 4");
    require(exit_code(cli.run("filter --in " + scored.string() + " --out " +
                              (d / "x3.jsonl").string() + " --mode bogus")) == 4,
            "unknown mode must exit 4");
}

struct Criterion {
    std::string name;
    std::function<void()> fn;
};

} // namespace

int main() {
    std::vector<Criterion> criteria{
        {"1. weight invariants (10k pools)", criterion_weight_invariants},
        {"2. band property (fuzz)", criterion_band_property},
        {"3. loss-reduction equivalences", criterion_loss_reductions},
        {"4. percentile oracle (exhaustive + random)", criterion_percentile_oracle},
        {"5. entropy oracle (exhaustive m<=6)", criterion_entropy_oracle},
        {"6. toy-model oracle", criterion_toy_model_oracle},
        {"7. contamination recall", criterion_contamination_recall},
        {"8. valid-set stability", criterion_valid_stability},
        {"9. determinism / replay", criterion_determinism_replay},
        {"10. end-to-end pipeline smoke", criterion_end_to_end_smoke},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        std::string verdict = "PASS";
        std::string detail;
        try {
            c.fn();
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = e.what();
            ++failures;
        }
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << verdict << "  " << c.name << "  (" << secs << "s)";
        if (!detail.empty()) std::cout << "\n      " << detail;
        std::cout << "\n";
    }
    if (failures != 0) std::cout << failures << " criterion(s) failed\n";
    return failures == 0 ? 0 : 1;
}

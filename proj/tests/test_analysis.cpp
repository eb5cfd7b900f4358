#include <algorithm>
#include <cmath>
#include <doctest.h>

#include "iwsi/analysis.hpp"
#include "iwsi/errors.hpp"
#include "test_util.hpp"

using namespace iwsi;

namespace {

ScoredSample scored(const std::string& id, double loss, double mean, double uncertainty = 0.0,
                    const std::string& answer = "4") {
    ScoredSample s;
    s.sample.question = {id, "question " + id};
    s.sample.rationale = "Steps. The answer is " + answer + ".";
    s.sample.voted_answer = answer;
    s.sample.vote_count = 1;
    s.sample.num_candidates = 1;
    s.sample.uncertainty = uncertainty;
    s.loss = loss;
    s.naive_weight = mean / loss;
    s.ds_weight = ds_weight(s.naive_weight);
    return s;
}

ScoredSample scored_ds(const std::string& id, double target_ds, bool above_mean,
                       double uncertainty = 0.0, const std::string& answer = "4") {
    // pick a loss that lands exactly on the requested ds weight
    double mean = 2.0;
    double loss = above_mean ? mean * target_ds : mean / target_ds;
    return scored(id, loss, mean, uncertainty, answer);
}

double trapezoid(const std::vector<double>& grid, const std::vector<double>& ys) {
    double area = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        area += 0.5 * (ys[i] + ys[i - 1]) * (grid[i] - grid[i - 1]);
    return area;
}

} // namespace

TEST_CASE("k_sweep rows match percentile results and stay monotone") {
    std::vector<ScoredSample> pool;
    for (double ds : {1.0, 1.1, 1.4, 1.8, 2.5})
        pool.push_back(scored_ds("q" + std::to_string(pool.size()), ds, true));

    auto rows = k_sweep(pool, {80.0, 40.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].k == 40.0);
    CHECK(rows[0].sigma == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(rows[1].k == 80.0);
    CHECK(rows[1].sigma == doctest::Approx(1.8).epsilon(1e-12));

    auto full = k_sweep(pool, {100.0});
    CHECK(full[0].sigma == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(full[0].kept == 5);
}

TEST_CASE("distribution report covers the valid set and each pool") {
    ValidSetSummary valid = summarize_valid({1.0, 2.0, 3.0});
    std::vector<ScoredSample> pool{scored("a", 1.0, 2.0), scored("b", 2.0, 2.0),
                                   scored("c", 3.0, 2.0)};
    auto report = loss_distribution_report(valid, {{"pool", pool}}, 6);
    REQUIRE(report.pools.size() == 2);
    CHECK(report.pools[0].name == "valid");
    CHECK(report.pools[1].mean == doctest::Approx(valid.mean).epsilon(1e-12));
    CHECK(report.pools[1].stddev == doctest::Approx(valid.stddev).epsilon(1e-12));

    for (const auto& p : report.pools) {
        std::size_t total = 0;
        for (std::size_t c : p.bin_counts) total += c;
        CHECK(total == 3);
    }
}

TEST_CASE("orthogonality report bins correctness by ds weight") {
    std::map<std::string, std::string> gold;
    std::vector<ScoredSample> pool;

    // single sample with ds 1.05, correct answer
    pool.push_back(scored_ds("q0", 1.05, true, 0.0, "4"));
    gold["q0"] = "4";
    auto hist = orthogonality_report(pool, gold, default_dsweight_boundaries());
    REQUIRE(hist.bins.size() == 5);
    CHECK(hist.bins[0].lo == 1.0);
    CHECK(hist.bins[0].correct == 1);
    CHECK(hist.bins[0].wrong == 0);
    CHECK(hist.total() == 1);

    // 20-sample fixture checked against a direct binning loop
    pool.clear();
    gold.clear();
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        std::string id = "s" + std::to_string(i);
        double ds = 1.0 + 1.8 * rng.uniform();
        bool correct = rng.uniform() < 0.5;
        pool.push_back(scored_ds(id, ds, i % 2 == 0, 0.0, correct ? "4" : "7"));
        gold[id] = "4";
    }
    auto boundaries = default_dsweight_boundaries();
    hist = orthogonality_report(pool, gold, boundaries);
    CHECK(hist.total() == 20);

    std::vector<std::pair<std::size_t, std::size_t>> expect(5, {0, 0});
    for (const auto& s : pool) {
        std::size_t bin = 4;
        for (std::size_t b = 0; b + 1 < boundaries.size(); ++b)
            if (s.ds_weight >= boundaries[b] && s.ds_weight < boundaries[b + 1]) {
                bin = b;
                break;
            }
        if (s.ds_weight >= boundaries.back()) bin = 4;
        if (normalize_answer(s.sample.voted_answer) == "4")
            ++expect[bin].first;
        else
            ++expect[bin].second;
    }
    for (std::size_t b = 0; b < 5; ++b) {
        CHECK(hist.bins[b].correct == expect[b].first);
        CHECK(hist.bins[b].wrong == expect[b].second);
    }

    // all correct -> zero wrong everywhere
    for (auto& [id, a] : gold) a = "4";
    for (auto& s : pool) s.sample.voted_answer = "4";
    hist = orthogonality_report(pool, gold, boundaries);
    for (const auto& b : hist.bins) CHECK(b.wrong == 0);

    // gold must cover the pool
    gold.erase("s3");
    CHECK_THROWS_AS(orthogonality_report(pool, gold, boundaries), MissingGoldError);
}

TEST_CASE("density curves integrate to one and nest by threshold") {
    std::vector<ScoredSample> pool;
    Rng rng(29);
    for (int i = 0; i < 120; ++i) {
        double u = rng.uniform();
        double ds = 1.0 + (i % 2 == 0 ? std::abs(0.05 * rng.uniform())
                                      : 2.0 + 0.05 * rng.uniform());
        pool.push_back(scored_ds("d" + std::to_string(i), std::max(ds, 1.0), true, u));
    }

    auto report = dsweight_density(pool, {0.3, 0.7, 1.0}, 0.1, 256);
    REQUIRE(report.curves.size() == 3);
    CHECK(report.curves[2].indices.size() == pool.size()); // u* = 1 uses everything

    for (std::size_t c = 0; c + 1 < report.curves.size(); ++c) {
        const auto& small = report.curves[c].indices;
        const auto& large = report.curves[c + 1].indices;
        CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
    }
    for (const auto& curve : report.curves) {
        if (curve.density.empty()) continue;
        CHECK(trapezoid(report.grid, curve.density) == doctest::Approx(1.0).epsilon(1e-2));
    }
}

TEST_CASE("bimodal pools produce peaks at both clusters") {
    std::vector<ScoredSample> pool;
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        // two tight clusters, plus a few far outliers so neither cluster sits
        // on the reflecting grid edge
        double ds = i % 2 == 0 ? 1.0 + 0.02 * rng.uniform() : 3.0 + 0.02 * (rng.uniform() - 0.5);
        if (i % 25 == 24) ds = 4.0;
        pool.push_back(scored_ds("b" + std::to_string(i), std::max(1.0, ds), true));
    }
    auto report = dsweight_density(pool, {1.0}, 0.08, 256);
    const auto& density = report.curves[0].density;
    REQUIRE(!density.empty());

    double step = report.grid[1] - report.grid[0];
    // global peak near 1
    std::size_t peak = static_cast<std::size_t>(
        std::max_element(density.begin(), density.end()) - density.begin());
    CHECK(report.grid[peak] <= 1.0 + step);

    // local peak within one grid step of 3
    std::size_t near3 = 0;
    double best = -1.0;
    for (std::size_t g = 0; g < report.grid.size(); ++g) {
        if (std::abs(report.grid[g] - 3.0) <= 0.25 && density[g] > best) {
            best = density[g];
            near3 = g;
        }
    }
    CHECK(std::abs(report.grid[near3] - 3.0) <= step + 1e-12);
}

TEST_CASE("degenerate pools concentrate mass at the left edge") {
    std::vector<ScoredSample> pool;
    for (int i = 0; i < 30; ++i) pool.push_back(scored_ds("u" + std::to_string(i), 1.0, true));
    auto report = dsweight_density(pool, {1.0}, 0.0, 128);
    const auto& density = report.curves[0].density;
    REQUIRE(!density.empty());
    CHECK(density.front() == *std::max_element(density.begin(), density.end()));
    CHECK(trapezoid(report.grid, density) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("contamination eval: boundaries and degenerate rates") {
    auto task = make_synthetic_task(60, 5, "t");
    auto valid_task = make_synthetic_task(30, 6, "v");
    PromptTemplate prompt = synthetic_prompt_template();
    ToyLanguageModel model = train_synthetic_model(make_synthetic_task(150, 7, "c"), 3, 0.05, prompt);
    ToyBackend backend(model);
    ValidSetSummary valid =
        summarize_valid(score_batch(backend, prompt, synthetic_valid_samples(valid_task)));

    // k = 100 drops nothing: recall 0, precision undefined
    CurationPolicy keep_all;
    keep_all.mode = CurationMode::iwsi;
    keep_all.k = 100.0;
    auto report = contamination_eval(task, {ShiftKind::jumping}, 0.3, keep_all, backend, prompt,
                                     valid, 17);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].recall.has_value());
    CHECK(*report.rows[0].recall == 0.0);
    CHECK(!report.rows[0].precision.has_value());

    // a rate that rounds to zero injected samples leaves recall undefined
    auto zero = contamination_eval(task, {ShiftKind::spurious}, 0.001, keep_all, backend, prompt,
                                   valid, 17);
    CHECK(zero.rows[0].injected == 0);
    CHECK(!zero.rows[0].recall.has_value());

    CHECK_THROWS_AS(contamination_eval(task, {ShiftKind::jumping}, 0.0, keep_all, backend,
                                       prompt, valid, 17),
                    Error);
}

TEST_CASE("perturbations keep the correct answer but change the rationale") {
    auto task = make_synthetic_task(5, 9, "p");
    Rng rng(3);
    for (const auto& s : task) {
        for (ShiftKind kind : {ShiftKind::redundant, ShiftKind::jumping, ShiftKind::spurious}) {
            std::string perturbed = perturb_rationale(s, kind, rng);
            CHECK(perturbed != s.gold_rationale);
            auto answer = extract_answer(perturbed);
            REQUIRE(answer.has_value());
            CHECK(normalize_answer(*answer) == normalize_answer(s.gold_answer));
        }
        CHECK(perturb_rationale(s, ShiftKind::jumping, rng) ==
              "The answer is " + s.gold_answer + ".");
    }
}

TEST_CASE("self-consuming loop: determinism, base case, resume") {
    PromptTemplate prompt = synthetic_prompt_template();
    auto corpus = make_synthetic_task(120, 21, "c");
    ToyLanguageModel initial = train_synthetic_model(corpus, 3, 0.05, prompt);
    auto questions = synthetic_questions(make_synthetic_task(12, 22, "q"));
    auto valid = synthetic_valid_samples(make_synthetic_task(15, 23, "v"));
    auto eval_task = make_synthetic_task(10, 24, "e");
    std::vector<EvalItem> eval_items;
    for (const auto& s : eval_task) eval_items.push_back({s.question, s.gold_answer});

    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 80.0;
    LoopOptions options;
    options.m = 5;
    options.temperature = 1.1;

    auto one = self_consuming_loop(initial, questions, valid, eval_items, policy, 1, 77, prompt,
                                   options);
    REQUIRE(one.size() == 1);
    CHECK(one[0].iteration == 1);

    std::vector<ToyLanguageModel> checkpoints;
    auto three = self_consuming_loop(initial, questions, valid, eval_items, policy, 3, 77, prompt,
                                     options, 1, nullptr,
                                     [&](int, const ToyLanguageModel& m, const LoopMetrics&) {
                                         checkpoints.push_back(m);
                                     });
    REQUIRE(three.size() == 3);
    REQUIRE(checkpoints.size() == 3);

    // iteration 1 of the long run equals the single-iteration run
    CHECK(three[0].accuracy == one[0].accuracy);
    CHECK(three[0].kept_fraction == one[0].kept_fraction);
    CHECK(three[0].mean_kept_loss == one[0].mean_kept_loss);
    CHECK(three[0].distinct_answer_ratio == one[0].distinct_answer_ratio);

    // resuming from the iteration-1 checkpoint reproduces iterations 2..3
    auto resumed = self_consuming_loop(initial, questions, valid, eval_items, policy, 3, 77,
                                       prompt, options, 2, &checkpoints[0]);
    REQUIRE(resumed.size() == 2);
    CHECK(resumed[0].accuracy == three[1].accuracy);
    CHECK(resumed[0].kept_fraction == three[1].kept_fraction);
    CHECK(resumed[0].mean_kept_loss == three[1].mean_kept_loss);
    CHECK(resumed[0].distinct_answer_ratio == three[1].distinct_answer_ratio);
    CHECK(resumed[1].accuracy == three[2].accuracy);
    CHECK(resumed[1].kept_fraction == three[2].kept_fraction);

    // same seed, same stream: first-iteration metrics agree across policies
    CurationPolicy plain;
    plain.mode = CurationMode::consistency_only;
    auto unfiltered = self_consuming_loop(initial, questions, valid, eval_items, plain, 1, 77,
                                          prompt, options);
    CHECK(unfiltered[0].distinct_answer_ratio == three[0].distinct_answer_ratio);
}

TEST_CASE("unfiltered self-consumption shrinks answer diversity on the reference fixture") {
    // fixture pinned so the curated counts outweigh the from-scratch anchor;
    // the decay is measured, not asserted from theory
    PromptTemplate prompt = synthetic_prompt_template();
    ToyLanguageModel initial = train_synthetic_model(make_synthetic_task(60, 61, "c"), 3, 0.05,
                                                     prompt);
    auto questions = synthetic_questions(make_synthetic_task(30, 62, "q"));
    auto valid = synthetic_valid_samples(make_synthetic_task(30, 63, "v"));
    auto eval_task = make_synthetic_task(15, 64, "e");
    std::vector<EvalItem> eval_items;
    for (const auto& s : eval_task) eval_items.push_back({s.question, s.gold_answer});

    CurationPolicy unfiltered;
    unfiltered.mode = CurationMode::consistency_only;
    LoopOptions options;
    options.m = 10;
    options.temperature = 1.1;
    options.epochs = 6;

    auto rows = self_consuming_loop(initial, questions, valid, eval_items, unfiltered, 3, 777,
                                    prompt, options);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].distinct_answer_ratio <= rows[0].distinct_answer_ratio);
    CHECK(rows[2].distinct_answer_ratio <= rows[1].distinct_answer_ratio);
}

TEST_CASE("csv outputs are byte-stable") {
    TempDir dir;
    std::vector<KSweepRow> rows{{40.0, 1.1, 2}, {80.0, 1.8, 4}};
    auto path = dir.file("ksweep.csv");
    write_ksweep_csv(rows, path);
    std::string first = slurp(path);
    CHECK(first == "k,sigma,kept\n40,1.1,2\n80,1.8,4\n");
    write_ksweep_csv(rows, path);
    CHECK(slurp(path) == first);
}

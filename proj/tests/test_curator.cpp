#include <cmath>
#include <doctest.h>

#include "iwsi/curator.hpp"
#include "iwsi/version.hpp"
#include "iwsi/errors.hpp"
#include "iwsi/rng.hpp"
#include "test_util.hpp"

using namespace iwsi;

namespace {

ScoredSample make_scored(const std::string& id, double loss, double mean, double uncertainty = 0.0,
                         int vote = 1, int m = 1) {
    ScoredSample s;
    s.sample.question = {id, "How many things does " + id + " have?"};
    s.sample.rationale = "Count them. The answer is 4.";
    s.sample.voted_answer = "4";
    s.sample.vote_count = vote;
    s.sample.num_candidates = m;
    s.sample.uncertainty = uncertainty;
    s.loss = loss;
    s.naive_weight = mean / loss;
    s.ds_weight = ds_weight(s.naive_weight);
    return s;
}

std::vector<ScoredSample> fixture_pool(double mean = 2.0) {
    std::vector<ScoredSample> pool;
    Rng rng(11);
    for (int i = 0; i < 20; ++i)
        pool.push_back(make_scored("q" + std::to_string(i), 0.5 + 3.0 * rng.uniform(), mean));
    return pool;
}

} // namespace

TEST_CASE("iwsi at k=100 keeps everything") {
    auto pool = fixture_pool();
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 100.0;
    auto curated = curate(pool, policy);
    CHECK(curated.kept_count() == pool.size());
    for (const auto& s : curated.samples) CHECK(s.training_weight == 1.0);
    REQUIRE(curated.sigma.has_value());
}

TEST_CASE("iwsi_w clips the naive weight and drops nothing") {
    std::vector<ScoredSample> pool{make_scored("a", 2.0, 2.0), make_scored("b", 0.2, 2.0)};
    REQUIRE(pool[1].naive_weight == 10.0);

    CurationPolicy policy;
    policy.mode = CurationMode::iwsi_w;
    policy.clip_c = 5.0;
    auto curated = curate(pool, policy);
    CHECK(curated.samples[0].training_weight == 1.0);
    CHECK(curated.samples[1].training_weight == 5.0);
    CHECK(curated.kept_count() == 2);
}

TEST_CASE("entropy and consistency_only modes") {
    std::vector<ScoredSample> pool{make_scored("a", 2.0, 2.0, 0.0, 3, 3),
                                   make_scored("b", 2.0, 2.0, 0.7, 2, 3)};
    CurationPolicy entropy;
    entropy.mode = CurationMode::entropy;
    entropy.u_star = 0.5;
    auto curated = curate(pool, entropy);
    CHECK(curated.samples[0].training_weight == 1.0);
    CHECK(curated.samples[1].training_weight == 0.0);

    CurationPolicy plain;
    plain.mode = CurationMode::consistency_only;
    auto all = curate(pool, plain);
    CHECK(all.kept_count() == 2);
}

TEST_CASE("iwsi keep/drop matches the ds threshold, and the band") {
    auto pool = fixture_pool();
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 70.0;
    auto curated = curate(pool, policy);
    REQUIRE(curated.sigma.has_value());
    double sigma = *curated.sigma;
    double mean = 2.0;
    for (const auto& s : curated.samples) {
        bool kept = s.training_weight == 1.0;
        CHECK(kept == (s.sample.ds_weight <= sigma));
        bool in_band = s.sample.loss >= (mean / sigma) * (1.0 - 1e-12) &&
                       s.sample.loss <= (mean * sigma) * (1.0 + 1e-12);
        CHECK(kept == in_band);
    }
}

TEST_CASE("training loss reductions at the boundaries") {
    auto pool = fixture_pool();
    std::vector<double> losses;
    for (const auto& s : pool) losses.push_back(s.loss);
    double mean = 0.0;
    for (double l : losses) mean += l;
    mean /= static_cast<double>(losses.size());

    CurationPolicy k100;
    k100.mode = CurationMode::iwsi;
    k100.k = 100.0;
    CHECK(weighted_training_loss(curate(pool, k100), losses) ==
          doctest::Approx(mean).epsilon(1e-9));

    CurationPolicy clip1;
    clip1.mode = CurationMode::iwsi_w;
    clip1.clip_c = 1.0;
    // naive weights in this fixture are spread around 1; clip to exactly 1
    // by feeding a pool whose weights are all >= 1
    std::vector<ScoredSample> heavy;
    std::vector<double> heavy_losses;
    for (int i = 0; i < 10; ++i) {
        heavy.push_back(make_scored("h" + std::to_string(i), 1.0 + 0.05 * i, 2.5));
        heavy_losses.push_back(heavy.back().loss);
    }
    double heavy_mean = 0.0;
    for (double l : heavy_losses) heavy_mean += l;
    heavy_mean /= static_cast<double>(heavy_losses.size());
    CHECK(weighted_training_loss(curate(heavy, clip1), heavy_losses) ==
          doctest::Approx(heavy_mean).epsilon(1e-9));
}

TEST_CASE("iwsi training loss normalizes by pool size times k") {
    // weights {1,1,0} over losses {2,4,6} with k = 200/3: (2+4)/(3 * 2/3) = 3
    std::vector<ScoredSample> pool{make_scored("a", 2.0, 2.5), make_scored("b", 4.0, 2.5),
                                   make_scored("c", 6.0, 2.5)};
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 200.0 / 3.0;
    auto curated = curate(pool, policy);
    CHECK(curated.kept_count() == 2);
    CHECK(weighted_training_loss(curated, {2.0, 4.0, 6.0}) == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("fine_tune ignores zero weights exactly") {
    PromptTemplate prompt;
    ToyLanguageModel model(2, 0.2, TokenizerMode::word);
    model.accumulate("base text", 1.0);

    auto pool = fixture_pool();
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 60.0;
    auto curated = curate(pool, policy);

    SUBCASE("all-zero weights leave the model untouched") {
        CuratedSet zeros = curated;
        for (auto& s : zeros.samples) s.training_weight = 0.0;
        auto tuned = fine_tune(model, zeros, 1, 1.0, prompt);
        CHECK(tuned == model);
    }

    SUBCASE("indicator weights equal training on the kept subset") {
        auto tuned = fine_tune(model, curated, 2, 0.5, prompt);
        CuratedSet only_kept;
        only_kept.policy = curated.policy;
        only_kept.sigma = curated.sigma;
        for (const auto& s : curated.samples)
            if (s.training_weight > 0.0) only_kept.samples.push_back(s);
        auto tuned2 = fine_tune(model, only_kept, 2, 0.5, prompt);
        CHECK(tuned.counts() == tuned2.counts());
    }

    SUBCASE("an epoch on the curated set lowers its mean kept loss") {
        ToyBackend before(model);
        double loss_before = training_loss(curated, before, prompt);
        auto tuned = fine_tune(model, curated, 1, 1.0, prompt);
        ToyBackend after(tuned);
        double loss_after = training_loss(curated, after, prompt);
        CHECK(loss_after < loss_before);
    }
}

TEST_CASE("re-curating the kept subset under the same sigma keeps all of it") {
    auto pool = fixture_pool();
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 50.0;
    auto curated = curate(pool, policy);
    REQUIRE(curated.sigma.has_value());

    std::vector<ScoredSample> kept;
    for (const auto& s : curated.samples)
        if (s.training_weight > 0.0) kept.push_back(s.sample);

    CurationPolicy fixed;
    fixed.mode = CurationMode::iwsi;
    fixed.fixed_sigma = *curated.sigma;
    auto again = curate(kept, fixed);
    CHECK(again.kept_count() == kept.size());
}

TEST_CASE("max_per_question keeps the lowest ds weights first") {
    std::vector<ScoredSample> pool;
    pool.push_back(make_scored("q1", 1.0, 2.0)); // ds 2.0
    pool.push_back(make_scored("q1", 2.0, 2.0)); // ds 1.0
    pool.push_back(make_scored("q1", 4.0, 2.0)); // ds 2.0
    pool.push_back(make_scored("q2", 2.0, 2.0)); // ds 1.0

    CurationPolicy policy;
    policy.mode = CurationMode::consistency_only;
    policy.max_per_question = 2;
    auto curated = curate(pool, policy);
    REQUIRE(curated.samples.size() == 3);
    // q1 keeps its ds=1 sample and the first of the tied ds=2 pair
    CHECK(curated.samples[0].sample.loss == 1.0);
    CHECK(curated.samples[1].sample.loss == 2.0);
    CHECK(curated.samples[2].sample.sample.question.id == "q2");
}

TEST_CASE("export writes kept samples only, with a metadata sidecar") {
    TempDir dir;
    auto pool = fixture_pool();
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi;
    policy.k = 40.0;
    auto curated = curate(pool, policy);
    std::size_t kept = curated.kept_count();
    REQUIRE(kept < pool.size());

    PromptTemplate prompt;
    auto sft_path = dir.file("export.jsonl");
    export_curated(curated, ExportFormat::sft_jsonl, sft_path, prompt, std::nullopt);

    std::string text = slurp(sft_path);
    std::size_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == kept);

    auto meta = CurationMetadata::load(metadata_path_for(sft_path));
    CHECK(meta.kept_count == kept);
    CHECK(meta.pool_size == pool.size());
    REQUIRE(meta.sigma.has_value());
    CHECK(*meta.sigma == *curated.sigma);
    CHECK(meta.tool_version == version_string());

    // weighted export round-trips weights
    auto weighted_path = dir.file("weighted.jsonl");
    export_curated(curated, ExportFormat::weighted_jsonl, weighted_path, prompt, std::nullopt);
    std::ifstream in(weighted_path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        auto j = ordered_json::parse(line);
        CHECK(j.at("weight").get<double>() == 1.0);
        CHECK(j.contains("prompt"));
        CHECK(j.contains("completion"));
        ++row;
    }
    CHECK(row == kept);

    // non-unit clipped weights survive the export bit-exactly
    CurationPolicy clipped;
    clipped.mode = CurationMode::iwsi_w;
    clipped.clip_c = 3.0;
    auto weighted_set = curate(pool, clipped);
    auto clip_path = dir.file("clipped.jsonl");
    export_curated(weighted_set, ExportFormat::weighted_jsonl, clip_path, prompt, std::nullopt);
    std::ifstream in2(clip_path);
    std::size_t idx = 0;
    while (std::getline(in2, line)) {
        auto j = ordered_json::parse(line);
        CHECK(j.at("weight").get<double>() == weighted_set.samples[idx].training_weight);
        ++idx;
    }
    CHECK(idx == weighted_set.samples.size());
}

TEST_CASE("curated jsonl round trips through its sidecar") {
    TempDir dir;
    auto pool = fixture_pool();
    CurationPolicy policy;
    policy.mode = CurationMode::iwsi_w;
    policy.clip_c = 3.0;
    auto curated = curate(pool, policy);

    auto path = dir.file("curated.jsonl");
    write_curated_jsonl(curated, path);
    auto back = read_curated_jsonl(path, metadata_path_for(path));
    REQUIRE(back.samples.size() == curated.samples.size());
    for (std::size_t i = 0; i < back.samples.size(); ++i) {
        CHECK(back.samples[i].training_weight == curated.samples[i].training_weight);
        CHECK(back.samples[i].sample == curated.samples[i].sample);
    }
    CHECK(back.policy.mode == CurationMode::iwsi_w);
}

TEST_CASE("curate rejects an empty pool") {
    CurationPolicy policy;
    CHECK_THROWS_AS(curate({}, policy), EmptyPoolError);
}

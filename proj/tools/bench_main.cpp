#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "iwsi/analysis.hpp"
#include "iwsi/backend.hpp"
#include "iwsi/dsweight.hpp"
#include "iwsi/records.hpp"
#include "iwsi/rng.hpp"
#include "iwsi/synthetic.hpp"
#include "iwsi/toy_model.hpp"

using namespace iwsi;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        auto start = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, seconds_since(start));
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-22s %10.4fs %10.4fs %8.2fx  results %s\n", name, serial, parallel,
                serial / parallel, identical ? "identical" : "DIFFER");
}

} // namespace

int main(int argc, char** argv) {
    std::size_t pool_size = argc > 1 ? static_cast<std::size_t>(std::stoul(argv[1])) : 4000;

#ifdef _OPENMP
    std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("openmp disabled (serial build)\n");
#endif
    std::printf("pool size %zu\n\n", pool_size);
    std::printf("%-22s %11s %11s %9s\n", "kernel", "serial", "parallel", "speedup");

    PromptTemplate prompt = synthetic_prompt_template();
    auto corpus = make_synthetic_task(600, 7, "c");
    ToyLanguageModel model = train_synthetic_model(corpus, 3, 0.05, prompt);
    ToyBackend backend(model, 160);

    auto task = make_synthetic_task(pool_size, 11, "b");
    std::vector<ScoreItem> items;
    for (const SyntheticSample& s : task)
        items.push_back({prompt.render_context(s.question.text),
                         render_sft_target(s.gold_rationale, s.gold_answer)});

    // batch scoring
    std::vector<double> serial_losses, parallel_losses;
    double t_serial = time_best_of(3, [&] { serial_losses = score_items_serial(model, items); });
    double t_parallel = time_best_of(3, [&] { parallel_losses = backend.score(items); });
    report("score_batch", t_serial, t_parallel, serial_losses == parallel_losses);

    // valid-set stability resampling
    StabilityReport st_serial, st_parallel;
    std::vector<std::size_t> sizes{std::max<std::size_t>(2, pool_size / 32),
                                   std::max<std::size_t>(4, pool_size / 8),
                                   std::max<std::size_t>(8, pool_size / 2)};
    t_serial = time_best_of(3, [&] {
        st_serial = stability_from_losses_serial(serial_losses, sizes, 2000, 13);
    });
    t_parallel =
        time_best_of(3, [&] { st_parallel = stability_from_losses(serial_losses, sizes, 2000, 13); });
    bool st_same = st_serial.rows.size() == st_parallel.rows.size();
    for (std::size_t i = 0; st_same && i < st_serial.rows.size(); ++i)
        st_same = st_serial.rows[i].trial_mean == st_parallel.rows[i].trial_mean &&
                  st_serial.rows[i].empirical_std == st_parallel.rows[i].empirical_std;
    report("stability_trials", t_serial, t_parallel, st_same);

    // KDE over the DS-weight grid
    ValidSetSummary summary = summarize_valid(std::vector<double>(serial_losses.begin(),
                                                                  serial_losses.begin() + 200));
    std::vector<ScoredSample> pool;
    auto consistent = synthetic_consistent_samples(task);
    for (std::size_t i = 0; i < consistent.size(); ++i) {
        ScoredSample s;
        s.sample = consistent[i];
        s.loss = serial_losses[i];
        s.naive_weight = summary.mean / std::max(serial_losses[i], 1e-9);
        s.ds_weight = ds_weight(s.naive_weight);
        pool.push_back(std::move(s));
    }
    std::vector<double> u_stars{0.2, 0.4, 0.6, 0.8, 1.0};
    DensityReport kde_serial, kde_parallel;
    t_serial = time_best_of(3,
                            [&] { kde_serial = dsweight_density_serial(pool, u_stars, 0.0, 2048); });
    t_parallel =
        time_best_of(3, [&] { kde_parallel = dsweight_density(pool, u_stars, 0.0, 2048); });
    bool kde_same = kde_serial.grid == kde_parallel.grid;
    for (std::size_t c = 0; kde_same && c < kde_serial.curves.size(); ++c)
        kde_same = kde_serial.curves[c].density == kde_parallel.curves[c].density;
    report("dsweight_density", t_serial, t_parallel, kde_same);

    return 0;
}

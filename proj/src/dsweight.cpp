#include "iwsi/dsweight.hpp"

#include <algorithm>
#include <cmath>

#include "iwsi/errors.hpp"
#include "iwsi/rng.hpp"

namespace iwsi {

namespace {

double mean_of(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double population_stddev(const std::vector<double>& xs, double mean) {
    // a constant list has zero spread even when its FP mean rounds
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

// Guarded nearest-rank comparison; the guard absorbs FP noise in k*total/100
// when the target rank is an exact integer.
bool meets_fraction(std::size_t kept, std::size_t total, double k) {
    double target = k * static_cast<double>(total);
    double tol = std::max(1e-9, target * 1e-12);
    return static_cast<double>(kept) * 100.0 >= target - tol;
}

} // namespace

ValidSetSummary summarize_valid(const std::vector<double>& losses) {
    if (losses.empty()) throw EmptyValidSetError();
    for (double l : losses)
        if (!std::isfinite(l) || l < 0.0)
            throw Error(ExitCode::precondition, "valid losses must be finite and >= 0");
    ValidSetSummary s;
    s.size = losses.size();
    s.losses = losses;
    s.mean = mean_of(losses);
    s.stddev = population_stddev(losses, s.mean);
    return s;
}

double naive_weight(double sample_loss, const ValidSetSummary& valid, double eps) {
    if (!(sample_loss > eps)) throw ZeroLossError("sample loss below " + std::to_string(eps));
    return valid.mean / sample_loss;
}

double ds_weight(double naive) {
    if (!(naive > 0.0)) throw Error(ExitCode::precondition, "naive weight must be > 0");
    return naive >= 1.0 ? naive : 1.0 / naive;
}

PercentileResult percentile_threshold(const std::vector<double>& weights, double k) {
    if (weights.empty()) throw EmptyPoolError();
    if (!(k > 0.0) || k > 100.0)
        throw Error(ExitCode::precondition, "k must lie in (0, 100]");

    std::vector<double> sorted = weights;
    std::sort(sorted.begin(), sorted.end());

    PercentileResult result;
    result.k = k;
    result.total = sorted.size();
    std::size_t i = 0;
    while (i < sorted.size()) {
        // advance over ties so kept counts every weight <= sorted[i]
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        if (meets_fraction(j + 1, sorted.size(), k)) {
            result.sigma = sorted[i];
            result.kept_count = j + 1;
            return result;
        }
        i = j + 1;
    }
    result.sigma = sorted.back();
    result.kept_count = sorted.size();
    return result;
}

std::vector<ScoredSample> score_pool(const std::vector<ConsistentSample>& samples,
                                     const ValidSetSummary& valid, const Backend& backend,
                                     const PromptTemplate& prompt, double eps) {
    std::vector<double> losses = score_batch(backend, prompt, samples);
    std::vector<ScoredSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ScoredSample s;
        s.sample = samples[i];
        s.loss = losses[i];
        // degenerate losses are floored rather than fatal here; a direct
        // naive_weight call on the raw loss still reports ZeroLossError
        s.naive_weight = valid.mean / std::max(losses[i], eps);
        s.ds_weight = ds_weight(s.naive_weight);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

StabilityReport stability_impl(const std::vector<double>& losses,
                               const std::vector<std::size_t>& sizes, int trials,
                               std::uint64_t seed, bool parallel) {
    if (losses.empty()) throw EmptyValidSetError();
    if (trials < 2) throw Error(ExitCode::precondition, "trials must be >= 2");
    for (std::size_t s : sizes)
        if (s == 0 || s > losses.size()) throw SizeExceedsPoolError(s, losses.size());

    StabilityReport report;
    report.trials = trials;
    report.pool_mean = mean_of(losses);
    report.pool_stddev = population_stddev(losses, report.pool_mean);

    for (std::size_t size : sizes) {
        std::vector<double> trial_means(static_cast<std::size_t>(trials));
        std::uint64_t size_seed = derive_seed(seed, static_cast<std::uint64_t>(size));
        auto run_trial = [&](int t) {
            Rng rng(derive_seed(size_seed, static_cast<std::uint64_t>(t)));
            auto idx = rng.sample_without_replacement(losses.size(), size);
            std::sort(idx.begin(), idx.end());
            double sum = 0.0;
            for (std::size_t i : idx) sum += losses[i];
            trial_means[static_cast<std::size_t>(t)] = sum / static_cast<double>(size);
        };
        if (parallel) {
#pragma omp parallel for schedule(static)
            for (int t = 0; t < trials; ++t) run_trial(t);
        } else {
            for (int t = 0; t < trials; ++t) run_trial(t);
        }

        StabilityRow row;
        row.n_v = size;
        row.trial_mean = mean_of(trial_means);
        row.empirical_std = population_stddev(trial_means, row.trial_mean);
        row.paper_pred = report.pool_stddev / static_cast<double>(size);
        row.classical_pred = report.pool_stddev / std::sqrt(static_cast<double>(size));
        report.rows.push_back(row);
    }
    return report;
}

} // namespace

StabilityReport stability_from_losses(const std::vector<double>& losses,
                                      const std::vector<std::size_t>& sizes, int trials,
                                      std::uint64_t seed) {
    return stability_impl(losses, sizes, trials, seed, true);
}

StabilityReport stability_from_losses_serial(const std::vector<double>& losses,
                                             const std::vector<std::size_t>& sizes, int trials,
                                             std::uint64_t seed) {
    return stability_impl(losses, sizes, trials, seed, false);
}

StabilityReport sample_mean_stability(const std::vector<ValidSample>& valid_pool,
                                      const Backend& backend, const PromptTemplate& prompt,
                                      const std::vector<std::size_t>& sizes, int trials,
                                      std::uint64_t seed) {
    return stability_from_losses(score_batch(backend, prompt, valid_pool), sizes, trials, seed);
}

} // namespace iwsi

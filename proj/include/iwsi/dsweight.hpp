#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iwsi/backend.hpp"
#include "iwsi/records.hpp"

namespace iwsi {

struct PercentileResult {
    double k = 0.0;            // requested percentage, (0, 100]
    double sigma = 1.0;        // smallest weight keeping at least k% of the pool
    std::size_t kept_count = 0; // |{i : w_i <= sigma}|, ties included
    std::size_t total = 0;
};

// Size, per-sample losses, mean and population standard deviation.
ValidSetSummary summarize_valid(const std::vector<double>& losses);

// w' = valid mean / sample loss. Throws ZeroLossError at or below eps;
// callers that floor degenerate losses do so before the division.
double naive_weight(double sample_loss, const ValidSetSummary& valid, double eps = 1e-9);

// max(w', 1/w'): 1 means no detected shift, larger means further from the
// valid-set loss level in either direction.
double ds_weight(double naive);

// Nearest-rank percentile over the weight multiset: sigma is the smallest
// weight value w such that at least k% of weights are <= w. Ties are all
// kept, so kept_count may exceed ceil(total * k / 100).
PercentileResult percentile_threshold(const std::vector<double>& weights, double k);

// Scores every sample against the backend (order preserved) and attaches
// naive and DS weights computed from the valid summary. Sample losses below
// eps are floored at eps before the ratio. The valid summary must come from
// the same backend and sft template.
std::vector<ScoredSample> score_pool(const std::vector<ConsistentSample>& samples,
                                     const ValidSetSummary& valid, const Backend& backend,
                                     const PromptTemplate& prompt, double eps = 1e-9);

struct StabilityRow {
    std::size_t n_v = 0;
    double trial_mean = 0.0;     // mean of per-subset sample means
    double empirical_std = 0.0;  // stddev of per-subset sample means across trials
    double paper_pred = 0.0;     // sigma_v / N_v, as published
    double classical_pred = 0.0; // sigma_v / sqrt(N_v)
};

struct StabilityReport {
    std::vector<StabilityRow> rows;
    double pool_mean = 0.0;
    double pool_stddev = 0.0;
    int trials = 0;

    // gsm8k reference point: sigma_v = 0.41, N_v = 100.
    static double reference_value() { return 0.41 / 100.0; }
    static std::string reference_line() { return "sigma_v/N_v = 0.41/100 = 4.1e-03"; }
};

// Draws `trials` random subsets per size and reports how the sample mean of
// the subset losses spreads. Trial RNG streams derive from (seed, size,
// trial), so adding trials or sizes never perturbs earlier draws. Subset
// losses are summed in index order, making each trial mean independent of
// draw order.
StabilityReport stability_from_losses(const std::vector<double>& losses,
                                      const std::vector<std::size_t>& sizes, int trials,
                                      std::uint64_t seed);

// Serial reference for the parallel kernel above; kept for tests and the
// benchmark.
StabilityReport stability_from_losses_serial(const std::vector<double>& losses,
                                             const std::vector<std::size_t>& sizes, int trials,
                                             std::uint64_t seed);

// Scores the pool with the backend, then delegates to stability_from_losses.
StabilityReport sample_mean_stability(const std::vector<ValidSample>& valid_pool,
                                      const Backend& backend, const PromptTemplate& prompt,
                                      const std::vector<std::size_t>& sizes, int trials,
                                      std::uint64_t seed);

} // namespace iwsi

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iwsi/backend.hpp"
#include "iwsi/curator.hpp"
#include "iwsi/dsweight.hpp"
#include "iwsi/records.hpp"
#include "iwsi/synthetic.hpp"
#include "iwsi/toy_model.hpp"

namespace iwsi {

struct KSweepRow {
    double k = 0.0;
    double sigma = 1.0;
    std::size_t kept = 0;
};

// Percentile threshold per k value, rows sorted by k.
std::vector<KSweepRow> k_sweep(const std::vector<ScoredSample>& pool, std::vector<double> ks);

struct DistributionPool {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<std::size_t> bin_counts;
};

struct DistributionReport {
    std::vector<double> bin_edges; // shared across pools, nbins + 1 edges
    std::vector<DistributionPool> pools; // valid set first
};

// Loss histograms of the valid set and each named pool over a common grid.
DistributionReport loss_distribution_report(
    const ValidSetSummary& valid,
    const std::vector<std::pair<std::string, std::vector<ScoredSample>>>& pools,
    std::size_t nbins = 20);

struct IntervalBin {
    double lo = 1.0;
    double hi = 0.0; // +inf in the final bin
    std::size_t correct = 0;
    std::size_t wrong = 0;
};

struct IntervalHistogram {
    std::vector<IntervalBin> bins;
    std::size_t total() const;
};

// {1, 1.1, 1.3, 1.5, 2}; the last bin is [2, inf).
std::vector<double> default_dsweight_boundaries();

// Correct/wrong counts (voted answer vs gold, normalized equality) per
// DS-weight interval. Every pooled question must have a gold answer.
IntervalHistogram orthogonality_report(const std::vector<ScoredSample>& pool,
                                       const std::map<std::string, std::string>& gold,
                                       const std::vector<double>& boundaries);

struct DensityCurve {
    double u_star = 1.0;
    std::vector<std::size_t> indices; // pool rows with uncertainty <= u_star
    double bandwidth = 0.0;
    std::vector<double> density; // empty when no samples qualify
};

struct DensityReport {
    std::vector<double> grid; // [1, w_max], fixed across curves
    std::vector<DensityCurve> curves;
};

// Gaussian KDE of DS weight per uncertainty threshold, reflected at both
// grid ends so each non-empty curve integrates to ~1 on the grid.
// bandwidth <= 0 selects Silverman's rule per curve.
DensityReport dsweight_density(const std::vector<ScoredSample>& pool,
                               const std::vector<double>& u_stars, double bandwidth = 0.0,
                               std::size_t grid_points = 256);

// Serial reference for the parallel grid evaluation.
DensityReport dsweight_density_serial(const std::vector<ScoredSample>& pool,
                                      const std::vector<double>& u_stars, double bandwidth = 0.0,
                                      std::size_t grid_points = 256);

struct ContaminationRow {
    ShiftKind kind = ShiftKind::redundant;
    std::size_t injected = 0;
    std::size_t dropped = 0;          // total dropped by the policy
    std::size_t dropped_injected = 0; // dropped AND injected
    std::optional<double> recall;     // dropped_injected / injected
    std::optional<double> precision;  // dropped_injected / dropped
};

struct ContaminationReport {
    std::vector<ContaminationRow> rows;
};

// Replaces round(rate * N) randomly chosen clean samples with perturbed
// variants (one experiment per kind), scores and curates the pool, and
// reports how well the filter isolates the injected samples.
ContaminationReport contamination_eval(const std::vector<SyntheticSample>& clean_pool,
                                       const std::vector<ShiftKind>& kinds, double rate,
                                       const CurationPolicy& policy, const Backend& backend,
                                       const PromptTemplate& prompt,
                                       const ValidSetSummary& valid, std::uint64_t seed);

struct LoopMetrics {
    int iteration = 0;
    double accuracy = 0.0;
    double kept_fraction = 0.0;
    double mean_kept_loss = 0.0;
    double distinct_answer_ratio = 0.0;
};

struct EvalItem {
    Question question;
    std::string gold_answer;
};

struct LoopOptions {
    int m = 15;
    double temperature = 1.1;
    int epochs = 1;
    double mix = 1.0;
    int max_tokens = 160;
};

using LoopCheckpointFn = std::function<void(int, const ToyLanguageModel&, const LoopMetrics&)>;

// Appendix-C style self-consuming loop. Iteration i generates with the
// previous iteration's model, votes, scores against the valid set, curates,
// then trains FROM SCRATCH (the initial model's counts) on the curated set
// and evaluates greedy accuracy on the eval split. Per-iteration seeds
// derive from (seed, iteration), so resuming from a checkpoint model at
// start_iteration reproduces the remaining iterations exactly.
std::vector<LoopMetrics> self_consuming_loop(
    const ToyLanguageModel& initial_model, const std::vector<Question>& questions,
    const std::vector<ValidSample>& valid, const std::vector<EvalItem>& eval_set,
    const CurationPolicy& policy, int iterations, std::uint64_t seed,
    const PromptTemplate& prompt, const LoopOptions& options = {}, int start_iteration = 1,
    const ToyLanguageModel* start_model = nullptr, const LoopCheckpointFn& on_iteration = nullptr);

// Methodology sidecar for a density report: kernel, bandwidth rule, the
// per-curve bandwidths actually used, and the normalization convention
// (each threshold subset normalizes on its own).
void write_density_metadata(const DensityReport& report, double bandwidth_flag,
                            const std::filesystem::path& path);

// CSV emitters matching the documented column layouts.
void write_ksweep_csv(const std::vector<KSweepRow>& rows, const std::filesystem::path& path);
void write_distribution_csv(const DistributionReport& report, const std::filesystem::path& path);
void write_orthogonality_csv(const IntervalHistogram& hist, const std::filesystem::path& path);
void write_density_csv(const DensityReport& report, const std::filesystem::path& path);
void write_contamination_csv(const ContaminationReport& report, const std::filesystem::path& path);
void write_loop_csv(const std::vector<LoopMetrics>& rows, const std::filesystem::path& path);
void write_stability_csv(const StabilityReport& report, const std::filesystem::path& path);

} // namespace iwsi

#include "iwsi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "iwsi/consistency.hpp"
#include "iwsi/csv.hpp"
#include "iwsi/errors.hpp"
#include "iwsi/rng.hpp"

namespace iwsi {

std::vector<KSweepRow> k_sweep(const std::vector<ScoredSample>& pool, std::vector<double> ks) {
    if (pool.empty()) throw EmptyPoolError();
    if (ks.empty()) throw Error(ExitCode::precondition, "need at least one k value");
    std::sort(ks.begin(), ks.end());

    std::vector<double> weights;
    weights.reserve(pool.size());
    for (const ScoredSample& s : pool) weights.push_back(s.ds_weight);

    std::vector<KSweepRow> rows;
    for (double k : ks) {
        PercentileResult r = percentile_threshold(weights, k);
        rows.push_back({k, r.sigma, r.kept_count});
    }
    return rows;
}

namespace {

double mean_of(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double population_stddev(const std::vector<double>& xs, double mean) {
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::vector<std::size_t> histogram_counts(const std::vector<double>& xs,
                                          const std::vector<double>& edges) {
    std::vector<std::size_t> counts(edges.size() - 1, 0);
    for (double x : xs) {
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        std::size_t bin = it == edges.begin()
                              ? 0
                              : std::min(static_cast<std::size_t>(it - edges.begin() - 1),
                                         counts.size() - 1);
        ++counts[bin];
    }
    return counts;
}

} // namespace

DistributionReport loss_distribution_report(
    const ValidSetSummary& valid,
    const std::vector<std::pair<std::string, std::vector<ScoredSample>>>& pools,
    std::size_t nbins) {
    if (nbins < 1) throw Error(ExitCode::precondition, "need at least one bin");

    std::vector<std::pair<std::string, std::vector<double>>> all;
    all.emplace_back("valid", valid.losses);
    for (const auto& [name, pool] : pools) {
        if (pool.empty()) throw EmptyPoolError();
        std::vector<double> losses;
        losses.reserve(pool.size());
        for (const ScoredSample& s : pool) losses.push_back(s.loss);
        all.emplace_back(name, std::move(losses));
    }

    double lo = all.front().second.front();
    double hi = lo;
    for (const auto& [name, losses] : all)
        for (double l : losses) {
            lo = std::min(lo, l);
            hi = std::max(hi, l);
        }
    if (hi <= lo) hi = lo + 1e-9;

    DistributionReport report;
    report.bin_edges.resize(nbins + 1);
    for (std::size_t i = 0; i <= nbins; ++i)
        report.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nbins);

    for (const auto& [name, losses] : all) {
        DistributionPool p;
        p.name = name;
        p.mean = mean_of(losses);
        p.stddev = population_stddev(losses, p.mean);
        p.bin_counts = histogram_counts(losses, report.bin_edges);
        report.pools.push_back(std::move(p));
    }
    return report;
}

std::size_t IntervalHistogram::total() const {
    std::size_t n = 0;
    for (const IntervalBin& b : bins) n += b.correct + b.wrong;
    return n;
}

std::vector<double> default_dsweight_boundaries() { return {1.0, 1.1, 1.3, 1.5, 2.0}; }

IntervalHistogram orthogonality_report(const std::vector<ScoredSample>& pool,
                                       const std::map<std::string, std::string>& gold,
                                       const std::vector<double>& boundaries) {
    if (boundaries.empty() || boundaries.front() != 1.0 ||
        !std::is_sorted(boundaries.begin(), boundaries.end()))
        throw Error(ExitCode::precondition, "boundaries must be sorted and start at 1");

    IntervalHistogram hist;
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
        IntervalBin bin;
        bin.lo = boundaries[i];
        bin.hi = i + 1 < boundaries.size() ? boundaries[i + 1]
                                           : std::numeric_limits<double>::infinity();
        hist.bins.push_back(bin);
    }

    for (const ScoredSample& s : pool) {
        auto it = gold.find(s.sample.question.id);
        if (it == gold.end()) throw MissingGoldError(s.sample.question.id);
        bool correct = normalize_answer(s.sample.voted_answer) == normalize_answer(it->second);

        std::size_t bin = hist.bins.size() - 1;
        for (std::size_t i = 0; i < hist.bins.size(); ++i) {
            if (s.ds_weight >= hist.bins[i].lo && s.ds_weight < hist.bins[i].hi) {
                bin = i;
                break;
            }
        }
        if (correct)
            ++hist.bins[bin].correct;
        else
            ++hist.bins[bin].wrong;
    }
    return hist;
}

namespace {

double silverman_bandwidth(const std::vector<double>& xs) {
    if (xs.size() < 2) return 1e-3;
    double mean = mean_of(xs);
    double sd = population_stddev(xs, mean);
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(sorted.size() - 1);
        std::size_t i = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(i);
        return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
    };
    double iqr = quantile(0.75) - quantile(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    double h = 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
    return h > 1e-6 ? h : 1e-3;
}

DensityReport density_impl(const std::vector<ScoredSample>& pool,
                           const std::vector<double>& u_stars, double bandwidth,
                           std::size_t grid_points, bool parallel) {
    if (pool.empty()) throw EmptyPoolError();
    if (grid_points < 2) throw Error(ExitCode::precondition, "grid needs at least two points");

    DensityReport report;
    double w_max = 1.0;
    for (const ScoredSample& s : pool) w_max = std::max(w_max, s.ds_weight);

    double h_max = 0.0;
    for (double u_star : u_stars) {
        DensityCurve curve;
        curve.u_star = u_star;
        std::vector<double> weights;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (pool[i].sample.uncertainty <= u_star) {
                curve.indices.push_back(i);
                weights.push_back(pool[i].ds_weight);
            }
        }
        curve.bandwidth = weights.empty() ? 0.0
                          : bandwidth > 0.0 ? bandwidth
                                            : silverman_bandwidth(weights);
        h_max = std::max(h_max, curve.bandwidth);
        report.curves.push_back(std::move(curve));
    }

    // the grid is [1, w_max]; a pool too narrow to span a grid borrows width
    // from the kernel so the reflected mass stays resolvable
    double lo = 1.0;
    double hi = w_max;
    if (hi - lo < 6.0 * std::max(h_max, 1e-3)) hi = lo + 6.0 * std::max(h_max, 1e-3);
    report.grid.resize(grid_points);
    for (std::size_t g = 0; g < grid_points; ++g)
        report.grid[g] =
            lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);

    for (DensityCurve& curve : report.curves) {
        if (curve.indices.empty()) continue; // empty curve: no density rows
        std::vector<double> weights;
        weights.reserve(curve.indices.size());
        for (std::size_t i : curve.indices) weights.push_back(pool[i].ds_weight);

        double h = curve.bandwidth;
        double norm = 1.0 / (static_cast<double>(weights.size()) * h * std::sqrt(2.0 * M_PI));
        curve.density.assign(grid_points, 0.0);
        auto eval_point = [&](std::ptrdiff_t g) {
            double x = report.grid[static_cast<std::size_t>(g)];
            double acc = 0.0;
            for (double w : weights) {
                // reflect mass at both grid ends so the density integrates
                // to ~1 on [lo, hi]
                for (double center : {w, 2.0 * lo - w, 2.0 * hi - w}) {
                    double z = (x - center) / h;
                    acc += std::exp(-0.5 * z * z);
                }
            }
            curve.density[static_cast<std::size_t>(g)] = norm * acc;
        };
        if (parallel) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(grid_points); ++g)
                eval_point(g);
        } else {
            for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(grid_points); ++g)
                eval_point(g);
        }
    }
    return report;
}

} // namespace

DensityReport dsweight_density(const std::vector<ScoredSample>& pool,
                               const std::vector<double>& u_stars, double bandwidth,
                               std::size_t grid_points) {
    return density_impl(pool, u_stars, bandwidth, grid_points, true);
}

DensityReport dsweight_density_serial(const std::vector<ScoredSample>& pool,
                                      const std::vector<double>& u_stars, double bandwidth,
                                      std::size_t grid_points) {
    return density_impl(pool, u_stars, bandwidth, grid_points, false);
}

ContaminationReport contamination_eval(const std::vector<SyntheticSample>& clean_pool,
                                       const std::vector<ShiftKind>& kinds, double rate,
                                       const CurationPolicy& policy, const Backend& backend,
                                       const PromptTemplate& prompt,
                                       const ValidSetSummary& valid, std::uint64_t seed) {
    if (clean_pool.empty()) throw EmptyPoolError();
    if (!(rate > 0.0) || rate >= 1.0)
        throw Error(ExitCode::precondition, "contamination rate must lie in (0, 1)");

    std::size_t n = clean_pool.size();
    std::size_t n_inj = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));

    ContaminationReport report;
    for (ShiftKind kind : kinds) {
        std::uint64_t kind_seed = derive_seed(seed, to_string(kind));
        Rng pick(kind_seed);
        auto injected_list = pick.sample_without_replacement(n, n_inj);
        std::set<std::size_t> injected(injected_list.begin(), injected_list.end());

        std::vector<ConsistentSample> samples = synthetic_consistent_samples(clean_pool);
        for (std::size_t i : injected) {
            Rng rng(derive_seed(kind_seed, static_cast<std::uint64_t>(i)));
            samples[i].rationale = perturb_rationale(clean_pool[i], kind, rng);
        }

        auto scored = score_pool(samples, valid, backend, prompt);
        CuratedSet curated = curate(scored, policy);

        ContaminationRow row;
        row.kind = kind;
        row.injected = n_inj;
        for (std::size_t i = 0; i < curated.samples.size(); ++i) {
            if (curated.samples[i].training_weight > 0.0) continue;
            ++row.dropped;
            if (injected.count(i)) ++row.dropped_injected;
        }
        if (row.injected > 0)
            row.recall = static_cast<double>(row.dropped_injected) / static_cast<double>(row.injected);
        if (row.dropped > 0)
            row.precision = static_cast<double>(row.dropped_injected) / static_cast<double>(row.dropped);
        report.rows.push_back(row);
    }
    return report;
}

std::vector<LoopMetrics> self_consuming_loop(
    const ToyLanguageModel& initial_model, const std::vector<Question>& questions,
    const std::vector<ValidSample>& valid, const std::vector<EvalItem>& eval_set,
    const CurationPolicy& policy, int iterations, std::uint64_t seed,
    const PromptTemplate& prompt, const LoopOptions& options, int start_iteration,
    const ToyLanguageModel* start_model, const LoopCheckpointFn& on_iteration) {
    if (iterations < 1) throw Error(ExitCode::precondition, "iterations must be >= 1");
    if (start_iteration < 1 || start_iteration > iterations)
        throw Error(ExitCode::precondition, "start_iteration out of range");
    if (start_iteration > 1 && start_model == nullptr)
        throw Error(ExitCode::precondition, "resuming needs the checkpoint model");
    if (valid.empty()) throw EmptyValidSetError();

    ToyLanguageModel current = start_iteration > 1 ? *start_model : initial_model;
    std::vector<LoopMetrics> metrics;

    for (int iter = start_iteration; iter <= iterations; ++iter) {
        std::uint64_t iter_seed = derive_seed(seed, static_cast<std::uint64_t>(iter));
        ToyBackend backend(current, options.max_tokens);

        // generate + vote
        std::vector<ConsistentSample> pool;
        std::size_t parseable_total = 0;
        std::set<std::string> distinct_answers;
        for (const Question& q : questions) {
            GenerationRecord record =
                generate_candidates(backend, prompt, q, options.m, options.temperature,
                                    derive_seed(iter_seed, q.id));
            for (const Candidate& c : record.candidates) {
                if (!c.answer) continue;
                ++parseable_total;
                distinct_answers.insert(normalize_answer(*c.answer));
            }
            try {
                VoteResult vote = majority_vote(record);
                auto kept = keep_rationales(record, vote);
                pool.insert(pool.end(), kept.begin(), kept.end());
            } catch (const NoParseableAnswerError&) {
                // question drops out of this iteration's pool
            }
        }

        LoopMetrics row;
        row.iteration = iter;
        row.distinct_answer_ratio =
            parseable_total == 0 ? 0.0
                                 : static_cast<double>(distinct_answers.size()) /
                                       static_cast<double>(parseable_total);

        // score + curate + train from scratch
        ToyLanguageModel next = initial_model;
        if (!pool.empty()) {
            ValidSetSummary summary = summarize_valid(score_batch(backend, prompt, valid));
            auto scored = score_pool(pool, summary, backend, prompt);
            CuratedSet curated = curate(scored, policy);
            row.kept_fraction = static_cast<double>(curated.kept_count()) /
                                static_cast<double>(curated.samples.size());
            double kept_loss = 0.0;
            std::size_t kept = 0;
            for (const CuratedSample& s : curated.samples) {
                if (s.training_weight <= 0.0) continue;
                kept_loss += s.sample.loss;
                ++kept;
            }
            row.mean_kept_loss = kept > 0 ? kept_loss / static_cast<double>(kept) : 0.0;
            next = fine_tune(initial_model, curated, options.epochs, options.mix, prompt);
        }

        // greedy accuracy on the held-out split, using this iteration's model
        ToyBackend eval_backend(next, options.max_tokens);
        std::size_t correct = 0;
        for (const EvalItem& item : eval_set) {
            auto completions = eval_backend.complete(prompt.render(item.question.text), 1, 0.0, 0);
            auto answer = extract_answer(completions.front());
            if (answer && normalize_answer(*answer) == normalize_answer(item.gold_answer))
                ++correct;
        }
        row.accuracy = eval_set.empty()
                           ? 0.0
                           : static_cast<double>(correct) / static_cast<double>(eval_set.size());

        metrics.push_back(row);
        if (on_iteration) on_iteration(iter, next, row);
        current = std::move(next);
    }
    return metrics;
}

void write_density_metadata(const DensityReport& report, double bandwidth_flag,
                            const std::filesystem::path& path) {
    ordered_json curves = ordered_json::array();
    for (const DensityCurve& curve : report.curves)
        curves.push_back(ordered_json{{"u_star", curve.u_star},
                                      {"samples", curve.indices.size()},
                                      {"bandwidth", curve.bandwidth}});
    ordered_json j{{"kernel", "gaussian"},
                   {"bandwidth_rule", bandwidth_flag > 0.0 ? "fixed" : "silverman"},
                   {"boundary", "reflection at both grid ends"},
                   {"normalization", "per_subset"},
                   {"grid_points", report.grid.size()},
                   {"grid_lo", report.grid.empty() ? 0.0 : report.grid.front()},
                   {"grid_hi", report.grid.empty() ? 0.0 : report.grid.back()},
                   {"curves", std::move(curves)}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

void write_ksweep_csv(const std::vector<KSweepRow>& rows, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const KSweepRow& r : rows)
        out.push_back({format_double(r.k), format_double(r.sigma), std::to_string(r.kept)});
    write_csv(path, "k,sigma,kept", out);
}

void write_distribution_csv(const DistributionReport& report, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const DistributionPool& pool : report.pools) {
        for (std::size_t b = 0; b < pool.bin_counts.size(); ++b) {
            out.push_back({pool.name, format_double(report.bin_edges[b]),
                           format_double(report.bin_edges[b + 1]),
                           std::to_string(pool.bin_counts[b]), format_double(pool.mean),
                           format_double(pool.stddev)});
        }
    }
    write_csv(path, "pool,bin_lo,bin_hi,count,mean,std", out);
}

void write_orthogonality_csv(const IntervalHistogram& hist, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const IntervalBin& b : hist.bins)
        out.push_back({format_double(b.lo), format_double(b.hi), std::to_string(b.correct),
                       std::to_string(b.wrong)});
    write_csv(path, "bin_lo,bin_hi,correct,wrong", out);
}

void write_density_csv(const DensityReport& report, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const DensityCurve& curve : report.curves) {
        for (std::size_t g = 0; g < curve.density.size(); ++g)
            out.push_back({format_double(curve.u_star), format_double(report.grid[g]),
                           format_double(curve.density[g])});
    }
    write_csv(path, "u_star,grid_w,density", out);
}

void write_contamination_csv(const ContaminationReport& report,
                             const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const ContaminationRow& r : report.rows)
        out.push_back({to_string(r.kind), std::to_string(r.injected), std::to_string(r.dropped),
                       r.recall ? format_double(*r.recall) : "null",
                       r.precision ? format_double(*r.precision) : "null"});
    write_csv(path, "kind,injected,dropped,recall,precision", out);
}

void write_loop_csv(const std::vector<LoopMetrics>& rows, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const LoopMetrics& r : rows)
        out.push_back({std::to_string(r.iteration), format_double(r.accuracy),
                       format_double(r.kept_fraction), format_double(r.mean_kept_loss),
                       format_double(r.distinct_answer_ratio)});
    write_csv(path, "iteration,accuracy,kept_fraction,mean_kept_loss,distinct_answer_ratio", out);
}

void write_stability_csv(const StabilityReport& report, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> out;
    for (const StabilityRow& r : report.rows)
        out.push_back({std::to_string(r.n_v), format_double(r.trial_mean),
                       format_double(r.empirical_std), format_double(r.paper_pred),
                       format_double(r.classical_pred)});
    write_csv(path, "n_v,trial_mean,empirical_std,paper_pred,classical_pred", out);
}

} // namespace iwsi

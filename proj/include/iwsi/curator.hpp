#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iwsi/backend.hpp"
#include "iwsi/dsweight.hpp"
#include "iwsi/records.hpp"
#include "iwsi/toy_model.hpp"

namespace iwsi {

enum class CurationMode { iwsi, iwsi_w, consistency_only, entropy };

CurationMode curation_mode_from_string(const std::string& s);
std::string to_string(CurationMode mode);

struct CurationPolicy {
    CurationMode mode = CurationMode::iwsi;
    double k = 80.0;      // iwsi filtering percentage
    double clip_c = 5.0;  // iwsi_w clip constant C
    double u_star = 1.0;  // entropy threshold
    std::optional<double> fixed_sigma; // iwsi: reuse a known threshold, skip the rank scan
    std::optional<int> max_per_question;

    void validate() const;
    ordered_json to_json() const;
    static CurationPolicy from_json(const ordered_json& j);
};

struct CuratedSample {
    ScoredSample sample;
    double training_weight = 1.0;
};

struct CuratedSet {
    std::vector<CuratedSample> samples; // the whole (possibly capped) pool
    std::optional<double> sigma;        // iwsi threshold actually applied
    CurationPolicy policy;

    std::size_t kept_count() const;
};

// Assigns training weights over the pool:
//   iwsi             indicator of ds_weight <= sigma_k%
//   iwsi_w           min(naive_weight, C), nothing dropped
//   consistency_only weight 1 everywhere
//   entropy          indicator of uncertainty <= u*
// max_per_question caps each question to its lowest-ds_weight rationales
// before any threshold is computed. Pool order is preserved.
CuratedSet curate(const std::vector<ScoredSample>& pool, const CurationPolicy& policy);

// Training-loss kernel over externally supplied losses (positionally aligned
// with curated.samples):
//   iwsi   sum(w_i * loss_i) / (N * k/100)
//   iwsi_w sum(clip_i * loss_i) / N
//   else   weighted mean over kept samples
double weighted_training_loss(const CuratedSet& curated, const std::vector<double>& losses);

// Rescores the curated pool against the current backend state and applies
// the kernel. Weights stay frozen from curation time; only losses refresh.
double training_loss(const CuratedSet& curated, const Backend& backend,
                     const PromptTemplate& prompt);

// train_update once per epoch with each sample's training weight; zero-weight
// samples never touch the count tables.
ToyLanguageModel fine_tune(const ToyLanguageModel& model, const CuratedSet& curated, int epochs,
                           double mix, const PromptTemplate& prompt);

// Training text for one sample: conditioning context plus sft target.
std::string training_text(const PromptTemplate& prompt, const ConsistentSample& sample);

enum class ExportFormat { sft_jsonl, weighted_jsonl };
ExportFormat export_format_from_string(const std::string& s);

struct CurationMetadata {
    CurationPolicy policy;
    std::optional<double> sigma;
    std::size_t pool_size = 0;
    std::size_t kept_count = 0;
    std::optional<ValidSetSummary> valid_summary;
    std::string tool_version;

    ordered_json to_json() const;
    static CurationMetadata from_json(const ordered_json& j);
    void save(const std::filesystem::path& path) const;
    static CurationMetadata load(const std::filesystem::path& path);
};

// sft_jsonl writes {"prompt","completion"} for kept samples only;
// weighted_jsonl adds "weight". A ".meta.json" sidecar carries the policy,
// sigma, pool size, valid summary and tool version.
void export_curated(const CuratedSet& curated, ExportFormat format,
                    const std::filesystem::path& path, const PromptTemplate& prompt,
                    const std::optional<ValidSetSummary>& valid_summary);

// Curated pool rows: scored keys plus "training_weight".
void write_curated_jsonl(const CuratedSet& curated, const std::filesystem::path& path);
CuratedSet read_curated_jsonl(const std::filesystem::path& path,
                              const std::filesystem::path& meta_path);

std::filesystem::path metadata_path_for(const std::filesystem::path& output);

} // namespace iwsi

#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scwm/classification.hpp"
#include "scwm/config.hpp"
#include "scwm/id_clustering.hpp"
#include "scwm/memory_bank.hpp"
#include "scwm/metrics.hpp"
#include "scwm/model.hpp"
#include "scwm/synthetic.hpp"
#include "scwm/weighted_memory.hpp"

namespace scwm {

// Everything the training stage consumes, produced with frozen parameters.
struct ClusteringOutput {
    PseudoLabels labels;
    std::vector<SampleFeatures> features;
    std::vector<PartMask> masks;     // per-sample pseudo masks from the cascade
    std::vector<PartMask> smoothed;  // masks blended with the previous epoch's smoothed masks
    std::vector<DifficultyScores> scores;
    MemoryBank bank;
    double eta = 0.0;
};

// Initial extractor and part classifier for config.seed (the pipeline's starting point).
ModelParams initial_params(const PipelineConfig& config);

// DBSCAN over the k-reciprocal Jaccard distance of the global features.
PseudoLabels pseudo_labels(std::span<const Vec> global_features, const PipelineConfig& config);

// Difficulty of every sample against its K nearest neighbours in the whole set. Part
// neighbourhoods are searched among samples whose part is valid.
std::vector<DifficultyScores> dataset_difficulty(std::span<const SampleFeatures> features, int k);

// prev_smoothed empty: smoothed masks equal the fresh masks. Throws std::runtime_error if
// every sample is an outlier.
ClusteringOutput clustering_stage(const Dataset& data, const ModelParams& params, const PipelineConfig& config,
                                  std::span<const PartMask> prev_smoothed, double gamma);

// P pseudo identities without replacement, K members each (drawn with replacement only when
// a cluster has fewer than K members). Outliers are never drawn.
std::vector<std::size_t> sample_batch(const PseudoLabels& labels, std::size_t ids, std::size_t instances,
                                      std::mt19937_64& rng);

struct TrainingReport {
    LossTerms mean_terms;
    std::vector<double> iteration_totals;
    std::size_t zero_weight_terms = 0;
    std::size_t degenerate_batches = 0;
};

// config.iterations SGD steps with a momentum bank update after each step. The random
// stream is derived from config.seed and epoch.
TrainingReport training_stage(const Dataset& data, const ClusteringOutput& clusters, MemoryBank& bank,
                              ModelParams& params, Heads& heads, const PipelineConfig& config, std::size_t epoch);

// Fraction of pixels whose predicted argmax equals the smoothed pseudo-mask argmax.
double mask_agreement(const Dataset& data, const ModelParams& params, std::span<const PartMask> smoothed);

struct EvalReport {
    std::size_t clusters = 0;
    std::size_t outliers = 0;
    double nmi = 0.0;
    double pairwise_f = 0.0;
    double mask_iou = 0.0;
    double stripe_iou = 0.0;
    RetrievalScores learned;
    RetrievalScores stripe;
};

// Camera 0 queries the other cameras. Retrieval features concatenate the normalized global
// feature with the normalized foreground part features (background channel excluded).
EvalReport evaluate(const Dataset& data, const ModelParams& params, const PipelineConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t clusters = 0;
    std::size_t outliers = 0;
    double gamma = 0.0;
    LossTerms losses;
    double nmi = 0.0;
    double mask_iou = 0.0;
    double mask_agreement = 0.0;
    std::size_t zero_weight_terms = 0;
};

struct PipelineResult {
    EvalReport initial;
    EvalReport final_report;
    std::vector<EpochRecord> epochs;
    ModelParams params;
    Heads heads;
    MemoryBank bank;
    std::vector<std::string> log;  // one line per epoch
    // Post-training mask agreement rose strictly over the first monitor_epochs epochs.
    bool agreement_increasing = false;
};

std::string format_record(const EpochRecord& record);

// True when mask_agreement strictly increases over the first `window` records (all
// records when fewer exist). Vacuously true for fewer than two records.
bool agreement_increasing(std::span<const EpochRecord> records, std::size_t window);
std::string format_report(const EvalReport& report);

// Alternates clustering and training for config.epochs. With a non-empty out_dir writes
// config.txt, train.log, report.txt and the final checkpoint under it.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir = {});

}  // namespace scwm

#include "scwm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "scwm/artifacts.hpp"
#include "scwm/numerics.hpp"
#include "scwm/scc.hpp"

namespace scwm {

namespace {

// Distinct stream per (seed, stage, epoch) so stages never share random draws.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(epoch)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kBatchStream = 2;

std::vector<Vec> globals_of(std::span<const SampleFeatures> features) {
    std::vector<Vec> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.global);
    return out;
}

std::vector<int> truth_of(const Dataset& data) {
    std::vector<int> out;
    for (const auto& s : data.samples) out.push_back(s.identity);
    return out;
}

std::size_t argmax_channel(const PartMask& m, std::size_t pixel) {
    const std::size_t pixels = m.dim(1) * m.dim(2);
    std::size_t best = 0;
    for (std::size_t k = 1; k < m.dim(0); ++k)
        if (m[k * pixels + pixel] > m[best * pixels + pixel]) best = k;
    return best;
}

Vec retrieval_feature(const FeatureMap& fmap, const PartMask& masks) {
    Vec out = l2_normalize(gap(fmap));
    const std::size_t dim = fmap.dim(0);
    for (std::size_t k = 0; k + 1 < masks.dim(0); ++k) {
        const Vec raw = masked_gap(fmap, masks.slice(k));
        if (is_zero(raw)) {
            out.insert(out.end(), dim, 0.0);
        } else {
            const Vec n = l2_normalize(raw);
            out.insert(out.end(), n.begin(), n.end());
        }
    }
    const double norm = l2_norm(out);
    for (auto& v : out) v /= norm;
    return out;
}

}  // namespace

ModelParams initial_params(const PipelineConfig& config) {
    return ModelParams::initial(config.synth.input_channels, config.feature_dim, config.parts,
                                stream_seed(config.seed, kModelStream, 0), config.classifier_init);
}

PseudoLabels pseudo_labels(std::span<const Vec> global_features, const PipelineConfig& config) {
    const int n = static_cast<int>(global_features.size());
    if (n < 2) throw std::invalid_argument("pseudo_labels: need at least two samples");
    const int k1 = std::min(config.k1, n - 1);
    const int k2 = std::min(config.k2, n);
    return dbscan(k_reciprocal_jaccard(global_features, k1, k2), config.eps, config.min_samples);
}

std::vector<DifficultyScores> dataset_difficulty(std::span<const SampleFeatures> features, int k) {
    const std::size_t n = features.size();
    if (n < 2) throw std::invalid_argument("dataset_difficulty: need at least two samples");
    const std::size_t parts = features.front().parts.size();
    const NeighborSets global = knn(globals_of(features), std::min(k, static_cast<int>(n) - 1));

    // part_nn[k][i]: neighbours of sample i in part space k (empty when invalid).
    std::vector<NeighborSets> part_nn(parts, NeighborSets(n));
    for (std::size_t p = 0; p < parts; ++p) {
        std::vector<std::size_t> members;
        std::vector<Vec> feats;
        for (std::size_t i = 0; i < n; ++i) {
            if (features[i].parts.size() != parts) throw std::invalid_argument("dataset_difficulty: part count");
            if (features[i].parts[p].empty()) continue;
            members.push_back(i);
            feats.push_back(features[i].parts[p]);
        }
        if (members.size() < 2) continue;
        const NeighborSets local = knn(feats, std::min(k, static_cast<int>(members.size()) - 1));
        for (std::size_t j = 0; j < members.size(); ++j) {
            auto& row = part_nn[p][members[j]];
            for (int idx : local[j]) row.push_back(static_cast<int>(members[static_cast<std::size_t>(idx)]));
        }
    }

    std::vector<DifficultyScores> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<int>> rows(parts);
        std::vector<char> valid(parts, 0);
        for (std::size_t p = 0; p < parts; ++p) {
            rows[p] = part_nn[p][i];
            valid[p] = rows[p].empty() ? 0 : 1;
        }
        out.push_back(difficulty(global[i], rows, valid));
    }
    return out;
}

ClusteringOutput clustering_stage(const Dataset& data, const ModelParams& params, const PipelineConfig& config,
                                  std::span<const PartMask> prev_smoothed, double gamma) {
    const std::size_t n = data.samples.size();
    if (!prev_smoothed.empty() && prev_smoothed.size() != n)
        throw std::invalid_argument("clustering_stage: previous mask count mismatch");
    ClusteringOutput out;
    out.eta = config.resolved_eta();
    std::vector<FeatureMap> fmaps;
    for (const auto& s : data.samples) {
        auto fw = forward_sample(params, s.input);
        out.features.push_back(std::move(fw.features));
        fmaps.push_back(std::move(fw.fmap));
    }

    out.labels = pseudo_labels(globals_of(out.features), config);
    if (out.labels.num_clusters == 0) {
        throw std::runtime_error("clustering_stage: all " + std::to_string(n) +
                                 " samples are outliers (eps=" + std::to_string(config.eps) +
                                 ", min_samples=" + std::to_string(config.min_samples) + ")");
    }

    for (std::size_t i = 0; i < n; ++i) {
        out.masks.push_back(cascaded_clustering(fmaps[i], config.parts, out.eta));
        out.smoothed.push_back(prev_smoothed.empty() ? out.masks.back()
                                                     : smooth_masks(prev_smoothed[i], out.masks.back(), gamma));
    }

    std::vector<std::vector<Vec>> spaces(config.parts + 1);
    for (const auto& f : out.features) {
        spaces[0].push_back(f.global);
        for (std::size_t k = 0; k < config.parts; ++k) spaces[k + 1].push_back(f.parts.at(k));
    }
    out.bank = init_memory(spaces, out.labels, config.momentum, config.temperature, config.strategy);
    out.scores = dataset_difficulty(out.features, config.difficulty_k);
    return out;
}

std::vector<std::size_t> sample_batch(const PseudoLabels& labels, std::size_t ids, std::size_t instances,
                                      std::mt19937_64& rng) {
    std::vector<std::vector<std::size_t>> members(labels.num_clusters);
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        if (labels.labels[i] != kOutlier) members.at(static_cast<std::size_t>(labels.labels[i])).push_back(i);
    std::vector<std::size_t> clusters;
    for (std::size_t c = 0; c < members.size(); ++c)
        if (!members[c].empty()) clusters.push_back(c);
    if (clusters.empty()) throw std::invalid_argument("sample_batch: no clustered samples");
    std::shuffle(clusters.begin(), clusters.end(), rng);
    clusters.resize(std::min(ids, clusters.size()));

    std::vector<std::size_t> batch;
    for (std::size_t c : clusters) {
        auto pool = members[c];
        std::shuffle(pool.begin(), pool.end(), rng);
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t j = 0; j < instances; ++j) batch.push_back(j < pool.size() ? pool[j] : pool[pick(rng)]);
    }
    return batch;
}

TrainingReport training_stage(const Dataset& data, const ClusteringOutput& clusters, MemoryBank& bank,
                              ModelParams& params, Heads& heads, const PipelineConfig& config, std::size_t epoch) {
    std::mt19937_64 rng(stream_seed(config.seed, kBatchStream, epoch));
    TrainingReport report;
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto batch = sample_batch(clusters.labels, config.batch_ids, config.batch_instances, rng);
        std::vector<DifficultyScores> scores;
        std::vector<int> labels;
        std::vector<const Tensor*> inputs;
        for (std::size_t i : batch) {
            scores.push_back(clusters.scores[i]);
            labels.push_back(clusters.labels.labels[i]);
            inputs.push_back(&data.samples[i].input);
        }
        const BatchWeights loss_weights = batch_weights(scores);
        report.degenerate_batches += loss_weights.degenerate ? 1 : 0;

        std::vector<TrainTarget> targets(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            targets[b].label = static_cast<std::size_t>(labels[b]);
            targets[b].smoothed = &clusters.smoothed[batch[b]];
            targets[b].scores = scores[b];
            targets[b].weight_global = loss_weights.global[b];
            targets[b].weight_parts = loss_weights.parts[b];
        }

        ModelGrads grads = ModelGrads::zeros_like(params, heads);
        std::vector<SampleForward> forwards;
        const LossReport loss =
            batch_loss(params, heads, bank, inputs, targets, config.beta, config.losses, &grads, &forwards);
        sgd_step(params, heads, grads, config.learning_rate);

        std::vector<SampleFeatures> feats;
        for (auto& fw : forwards) feats.push_back(std::move(fw.features));
        const BatchWeights update = strategy_weights(bank.strategy, labels, feats, scores, bank);
        memory_update(bank, labels, feats, update);

        report.mean_terms.scc += loss.terms.scc;
        report.mean_terms.wm += loss.terms.wm;
        report.mean_terms.id += loss.terms.id;
        report.iteration_totals.push_back(loss.terms.total());
        report.zero_weight_terms += loss.zero_weight_terms;
    }
    const double inv = 1.0 / static_cast<double>(config.iterations);
    report.mean_terms.scc *= inv;
    report.mean_terms.wm *= inv;
    report.mean_terms.id *= inv;
    return report;
}

double mask_agreement(const Dataset& data, const ModelParams& params, std::span<const PartMask> smoothed) {
    if (smoothed.size() != data.samples.size()) throw std::invalid_argument("mask_agreement: mask count mismatch");
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        const auto probs = part_classifier_forward(params.classifier, extractor_forward(params.extractor, data.samples[i].input));
        const std::size_t pixels = probs.dim(1) * probs.dim(2);
        for (std::size_t p = 0; p < pixels; ++p) agree += argmax_channel(probs, p) == argmax_channel(smoothed[i], p);
        total += pixels;
    }
    return static_cast<double>(agree) / static_cast<double>(total);
}

EvalReport evaluate(const Dataset& data, const ModelParams& params, const PipelineConfig& config) {
    const std::size_t n = data.samples.size();
    if (n == 0) throw std::invalid_argument("evaluate: empty dataset");
    const auto& sc = data.config;
    const PartMask stripes = stripe_masks(config.parts, sc.height, sc.width);

    EvalReport report;
    std::vector<Vec> globals;
    std::vector<PartMask> predicted, stripe_pred, truth;
    std::vector<Vec> q_learned, g_learned, q_stripe, g_stripe;
    std::vector<int> q_ids, g_ids;
    for (const auto& s : data.samples) {
        const auto fw = forward_sample(params, s.input);
        if (fw.probs.dim(0) != s.gt_mask.dim(0))
            throw std::invalid_argument("evaluate: part count differs from ground truth");
        globals.push_back(fw.features.global);
        predicted.push_back(argmax_mask(fw.probs));
        stripe_pred.push_back(stripes);
        truth.push_back(s.gt_mask);
        const bool query = s.camera == 0;
        (query ? q_learned : g_learned).push_back(retrieval_feature(fw.fmap, predicted.back()));
        (query ? q_stripe : g_stripe).push_back(retrieval_feature(fw.fmap, stripes));
        (query ? q_ids : g_ids).push_back(s.identity);
    }
    if (q_ids.empty() || g_ids.empty()) throw std::invalid_argument("evaluate: degenerate query/gallery split");

    const PseudoLabels labels = pseudo_labels(globals, config);
    report.clusters = labels.num_clusters;
    report.outliers = labels.outliers();
    const auto expanded = expand_outliers(labels.labels);
    const auto gt = truth_of(data);
    report.nmi = nmi(expanded, gt);
    report.pairwise_f = pairwise_f(expanded, gt);
    report.mask_iou = best_permutation_iou(predicted, truth).mean_iou;
    report.stripe_iou = best_permutation_iou(stripe_pred, truth).mean_iou;
    report.learned = retrieval(q_learned, q_ids, g_learned, g_ids);
    report.stripe = retrieval(q_stripe, q_ids, g_stripe, g_ids);
    return report;
}

std::string format_record(const EpochRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "epoch=%zu clusters=%zu outliers=%zu gamma=%.6f loss_scc=%.9f loss_wm=%.9f loss_id=%.9f "
                  "loss_total=%.9f nmi=%.6f mask_iou=%.6f mask_agreement=%.6f zero_weight_terms=%zu",
                  r.epoch, r.clusters, r.outliers, r.gamma, r.losses.scc, r.losses.wm, r.losses.id, r.losses.total(),
                  r.nmi, r.mask_iou, r.mask_agreement, r.zero_weight_terms);
    return buf;
}

std::string format_report(const EvalReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "clusters=%zu outliers=%zu nmi=%.6f pairwise_f=%.6f mask_iou=%.6f stripe_iou=%.6f "
                  "map=%.6f rank1=%.6f stripe_map=%.6f stripe_rank1=%.6f",
                  r.clusters, r.outliers, r.nmi, r.pairwise_f, r.mask_iou, r.stripe_iou, r.learned.map,
                  r.learned.rank1, r.stripe.map, r.stripe.rank1);
    return buf;
}

bool agreement_increasing(std::span<const EpochRecord> records, std::size_t window) {
    const std::size_t n = std::min(window, records.size());
    for (std::size_t e = 1; e < n; ++e)
        if (!(records[e].mask_agreement > records[e - 1].mask_agreement)) return false;
    return true;
}

PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    const Dataset data = synth_generate(config.synth, config.seed);
    PipelineResult result;
    result.params = initial_params(config);
    result.initial = evaluate(data, result.params, config);

    std::vector<PartMask> smoothed;
    const auto gt = truth_of(data);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        EpochRecord record;
        record.epoch = epoch;
        record.gamma = config.gamma_at(epoch);
        ClusteringOutput clusters = clustering_stage(data, result.params, config, smoothed, record.gamma);
        record.clusters = clusters.labels.num_clusters;
        record.outliers = clusters.labels.outliers();
        record.nmi = nmi(expand_outliers(clusters.labels.labels), gt);

        result.bank = std::move(clusters.bank);
        result.heads = Heads::from_bank(result.bank, config.head_scale);
        const TrainingReport train =
            training_stage(data, clusters, result.bank, result.params, result.heads, config, epoch);
        record.losses = train.mean_terms;
        record.zero_weight_terms = train.zero_weight_terms;
        record.mask_agreement = mask_agreement(data, result.params, clusters.smoothed);

        std::vector<PartMask> predicted, truth;
        for (const auto& s : data.samples) {
            predicted.push_back(argmax_mask(forward_sample(result.params, s.input).probs));
            truth.push_back(s.gt_mask);
        }
        record.mask_iou = best_permutation_iou(predicted, truth).mean_iou;
        smoothed = std::move(clusters.smoothed);
        result.epochs.push_back(record);
        result.log.push_back(format_record(record));
    }
    result.final_report = config.epochs == 0 ? result.initial : evaluate(data, result.params, config);
    result.agreement_increasing = agreement_increasing(result.epochs, config.monitor_epochs);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(out_dir / "config.txt") << config_dump(config);
        std::ofstream log(out_dir / "train.log");
        for (const auto& line : result.log) log << line << '\n';
        std::ofstream(out_dir / "report.txt") << "initial " << format_report(result.initial) << '\n'
                                              << "final " << format_report(result.final_report) << '\n'
                                              << "monitor epochs=" << config.monitor_epochs
                                              << " agreement_increasing=" << (result.agreement_increasing ? 1 : 0)
                                              << '\n';
        save_checkpoint(out_dir / "checkpoint", {result.params, result.heads, result.bank});
    }
    return result;
}

}  // namespace scwm

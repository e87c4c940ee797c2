#include "scwm/model.hpp"

#include <cmath>
#include <stdexcept>

#include "scwm/scc.hpp"

namespace scwm {

ExtractorParams ExtractorParams::zeros(std::size_t out_channels, std::size_t in_channels) {
    return {Tensor({out_channels, in_channels}), Vec(out_channels, 0.0)};
}

ExtractorParams ExtractorParams::random(std::size_t out_channels, std::size_t in_channels, std::mt19937_64& rng) {
    auto params = zeros(out_channels, in_channels);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_channels)));
    for (auto& w : params.weight.raw()) w = normal(rng);
    return params;
}

FeatureMap extractor_forward(const ExtractorParams& params, const Tensor& input) {
    if (input.rank() != 3 || input.dim(0) != params.in_channels())
        throw std::invalid_argument("extractor_forward: input channel mismatch");
    const std::size_t out = params.out_channels();
    const std::size_t in = params.in_channels();
    const std::size_t pixels = input.dim(1) * input.dim(2);
    FeatureMap fmap({out, input.dim(1), input.dim(2)});
    for (std::size_t o = 0; o < out; ++o) {
        auto dst = fmap.slice(o);
        for (std::size_t p = 0; p < pixels; ++p) dst[p] = params.bias[o];
        for (std::size_t i = 0; i < in; ++i) {
            const double w = params.weight.at(o, i);
            const auto src = input.slice(i);
            for (std::size_t p = 0; p < pixels; ++p) dst[p] += w * src[p];
        }
    }
    return fmap;
}

ExtractorGrads extractor_backward(const ExtractorParams& params, const Tensor& input, const FeatureMap& upstream) {
    if (input.rank() != 3 || input.dim(0) != params.in_channels())
        throw std::invalid_argument("extractor_backward: input channel mismatch");
    if (upstream.rank() != 3 || upstream.dim(0) != params.out_channels() || upstream.dim(1) != input.dim(1) ||
        upstream.dim(2) != input.dim(2))
        throw std::invalid_argument("extractor_backward: upstream shape mismatch");
    const std::size_t out = params.out_channels();
    const std::size_t in = params.in_channels();
    const std::size_t pixels = input.dim(1) * input.dim(2);
    ExtractorGrads grads{Tensor(params.weight.dims()), Vec(out, 0.0), Tensor(input.dims())};
    for (std::size_t o = 0; o < out; ++o) {
        const auto g = upstream.slice(o);
        for (std::size_t p = 0; p < pixels; ++p) grads.bias[o] += g[p];
        for (std::size_t i = 0; i < in; ++i) {
            const auto src = input.slice(i);
            auto dst = grads.input.slice(i);
            const double w = params.weight.at(o, i);
            double acc = 0.0;
            for (std::size_t p = 0; p < pixels; ++p) {
                acc += g[p] * src[p];
                dst[p] += w * g[p];
            }
            grads.weight.at(o, i) = acc;
        }
    }
    return grads;
}

ModelParams ModelParams::initial(std::size_t input_channels, std::size_t feature_dim, std::size_t parts,
                                 std::uint64_t seed, double classifier_scale) {
    std::mt19937_64 rng(seed);
    ModelParams params;
    params.extractor = ExtractorParams::random(feature_dim, input_channels, rng);
    params.classifier = PartClassifierParams::random(parts, feature_dim, classifier_scale, rng);
    return params;
}

Heads Heads::from_bank(const MemoryBank& bank, double scale) {
    Heads heads;
    heads.global = LinearHead::from_centroids(bank.centroids.at(0), scale);
    for (std::size_t k = 0; k < bank.parts(); ++k)
        heads.parts.push_back(LinearHead::from_centroids(bank.centroids[k + 1], scale));
    return heads;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& params, const Heads& heads) {
    ModelGrads g;
    g.params.extractor = ExtractorParams::zeros(params.extractor.out_channels(), params.extractor.in_channels());
    g.params.classifier = {Tensor(params.classifier.kernel.dims()), Vec(params.classifier.parts(), 0.0)};
    g.heads.global = LinearHead::zeros(heads.global.classes(), heads.global.dim());
    for (const auto& h : heads.parts) g.heads.parts.push_back(LinearHead::zeros(h.classes(), h.dim()));
    return g;
}

SampleForward forward_sample(const ModelParams& params, const Tensor& input) {
    SampleForward fw;
    fw.fmap = extractor_forward(params.extractor, input);
    fw.probs = part_classifier_forward(params.classifier, fw.fmap);
    fw.raw_global = gap(fw.fmap);
    fw.features.global = l2_normalize(fw.raw_global);
    const std::size_t parts = fw.probs.dim(0);
    for (std::size_t k = 0; k < parts; ++k) {
        fw.raw_parts.push_back(masked_gap(fw.fmap, fw.probs.slice(k)));
        const Vec& raw = fw.raw_parts.back();
        fw.features.parts.push_back(is_zero(raw) ? Vec{} : l2_normalize(raw));
    }
    return fw;
}

namespace {

void add_scaled(std::span<double> dst, std::span<const double> src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

void add_head(LinearHead& dst, const HeadGrads& src, double scale) {
    add_scaled(dst.weight.values(), src.weight.values(), scale);
    add_scaled(dst.bias, src.bias, scale);
}

}  // namespace

LossReport sample_loss(const ModelParams& params, const Heads& heads, const MemoryBank& bank, const Tensor& input,
                       const TrainTarget& target, double beta, const LossSwitches& switches, ModelGrads* grads,
                       double grad_scale, SampleForward* forward) {
    SampleForward fw = forward_sample(params, input);
    const std::size_t parts = fw.features.parts.size();
    const std::size_t dim = fw.features.global.size();
    const std::size_t pixels = fw.fmap.dim(1) * fw.fmap.dim(2);
    const double inv_pixels = 1.0 / static_cast<double>(pixels);

    LossReport report;
    for (const auto& p : fw.features.parts) report.skipped_parts += p.empty() ? 1 : 0;

    Tensor dprobs(fw.probs.dims());
    Vec dglobal(dim, 0.0);
    std::vector<Vec> dparts(parts, Vec(dim, 0.0));

    if (switches.parsing || switches.diversity) {
        if (target.smoothed == nullptr) throw std::invalid_argument("sample_loss: missing pseudo masks");
        if (switches.parsing) {
            const auto l = parsing_loss(*target.smoothed, fw.probs);
            report.terms.scc += l.loss;
            add_scaled(dprobs.values(), l.grad.values(), 1.0);
        }
        if (switches.diversity) {
            const auto l = diversity_loss(fw.probs);
            report.terms.scc += l.loss;
            add_scaled(dprobs.values(), l.grad.values(), 1.0);
        }
    }

    if (switches.wnce || switches.sep) {
        if (switches.wnce) {
            double wg = target.weight_global;
            if (wg == 0.0) {
                wg = 1.0;
                ++report.zero_weight_terms;
            }
            Vec wp = target.weight_parts;
            if (wp.size() != parts) throw std::invalid_argument("sample_loss: part weight count mismatch");
            for (std::size_t k = 0; k < parts; ++k) {
                if (wp[k] == 0.0 && !fw.features.parts[k].empty()) {
                    wp[k] = 1.0;
                    ++report.zero_weight_terms;
                }
                if (fw.features.parts[k].empty()) wp[k] = 1.0;
            }
            const auto l = wnce_loss(fw.features, target.label, bank, wg, wp);
            report.terms.wm += l.loss;
            add_scaled(dglobal, l.global, 1.0);
            for (std::size_t k = 0; k < parts; ++k)
                if (!l.parts[k].empty()) add_scaled(dparts[k], l.parts[k], 1.0);
        }
        if (switches.sep) {
            std::vector<Vec> own;
            for (std::size_t k = 0; k < parts; ++k) own.push_back(bank.centroids.at(k + 1).at(target.label));
            const auto l = sep_loss(fw.features.parts, own, bank.temperature);
            report.terms.wm += l.loss;
            for (std::size_t k = 0; k < parts; ++k)
                if (!l.parts[k].empty()) add_scaled(dparts[k], l.parts[k], 1.0);
        }
    }

    std::vector<HeadGrads> head_grads;
    HeadGrads global_head_grads;
    if (switches.id) {
        const std::size_t classes = heads.global.classes();
        const Vec y = one_hot(target.label, classes);
        const auto out_g = head_forward(heads.global, fw.features.global);
        std::vector<HeadOutput> out_p(parts);
        std::vector<Vec> q_parts(parts), y_parts(parts);
        Vec alpha_valid;
        std::vector<Vec> q_valid;
        for (std::size_t k = 0; k < parts; ++k) {
            if (fw.features.parts[k].empty()) continue;
            out_p[k] = head_forward(heads.parts.at(k), fw.features.parts[k]);
            q_parts[k] = out_p[k].probs;
            y_parts[k] = refine_part_label(y, target.scores.alpha_p.at(k));
            alpha_valid.push_back(target.scores.alpha_p[k]);
            q_valid.push_back(out_p[k].probs);
        }
        const Vec y_g = alpha_valid.empty() ? y
                                            : distill_global_label(y, beta, part_agreement_weights(alpha_valid), q_valid);
        const auto l = id_loss(out_g.probs, q_parts, y_g, y_parts);
        report.terms.id += l.loss;

        global_head_grads = head_backward(heads.global, fw.features.global, l.global);
        add_scaled(dglobal, global_head_grads.input, 1.0);
        head_grads.resize(parts);
        for (std::size_t k = 0; k < parts; ++k) {
            if (l.parts[k].empty()) continue;
            head_grads[k] = head_backward(heads.parts[k], fw.features.parts[k], l.parts[k]);
            add_scaled(dparts[k], head_grads[k].input, 1.0);
        }
    }

    if (grads != nullptr) {
        Tensor dfmap(fw.fmap.dims());
        const Vec draw_g = l2_normalize_backward(fw.raw_global, dglobal);
        for (std::size_t c = 0; c < dim; ++c) {
            auto dst = dfmap.slice(c);
            for (std::size_t p = 0; p < pixels; ++p) dst[p] += draw_g[c] * inv_pixels;
        }
        for (std::size_t k = 0; k < parts; ++k) {
            if (fw.features.parts[k].empty()) continue;
            const Vec draw = l2_normalize_backward(fw.raw_parts[k], dparts[k]);
            const auto mask = fw.probs.slice(k);
            auto dmask = dprobs.slice(k);
            for (std::size_t c = 0; c < dim; ++c) {
                const auto chan = fw.fmap.slice(c);
                auto dst = dfmap.slice(c);
                const double g = draw[c] * inv_pixels;
                for (std::size_t p = 0; p < pixels; ++p) {
                    dst[p] += mask[p] * g;
                    dmask[p] += chan[p] * g;
                }
            }
        }
        const auto cls = part_classifier_backward(params.classifier, fw.fmap, dprobs);
        add_scaled(dfmap.values(), cls.input.values(), 1.0);
        const auto ext = extractor_backward(params.extractor, input, dfmap);

        add_scaled(grads->params.extractor.weight.values(), ext.weight.values(), grad_scale);
        add_scaled(grads->params.extractor.bias, ext.bias, grad_scale);
        add_scaled(grads->params.classifier.kernel.values(), cls.kernel.values(), grad_scale);
        add_scaled(grads->params.classifier.bias, cls.bias, grad_scale);
        if (switches.id) {
            add_head(grads->heads.global, global_head_grads, grad_scale);
            for (std::size_t k = 0; k < parts; ++k)
                if (!head_grads[k].bias.empty()) add_head(grads->heads.parts[k], head_grads[k], grad_scale);
        }
    }
    if (forward != nullptr) *forward = std::move(fw);
    return report;
}

LossReport batch_loss(const ModelParams& params, const Heads& heads, const MemoryBank& bank,
                      std::span<const Tensor* const> inputs, std::span<const TrainTarget> targets, double beta,
                      const LossSwitches& switches, ModelGrads* grads, std::vector<SampleForward>* forwards) {
    if (inputs.size() != targets.size() || inputs.empty()) throw std::invalid_argument("batch_loss: bad batch");
    const double scale = 1.0 / static_cast<double>(inputs.size());
    LossReport total;
    if (forwards != nullptr) forwards->assign(inputs.size(), SampleForward{});
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto r = sample_loss(params, heads, bank, *inputs[i], targets[i], beta, switches, grads, scale,
                                   forwards != nullptr ? &(*forwards)[i] : nullptr);
        total.terms.scc += scale * r.terms.scc;
        total.terms.wm += scale * r.terms.wm;
        total.terms.id += scale * r.terms.id;
        total.zero_weight_terms += r.zero_weight_terms;
        total.skipped_parts += r.skipped_parts;
    }
    return total;
}

void sgd_step(ModelParams& params, Heads& heads, const ModelGrads& grads, double learning_rate) {
    add_scaled(params.extractor.weight.values(), grads.params.extractor.weight.values(), -learning_rate);
    add_scaled(params.extractor.bias, grads.params.extractor.bias, -learning_rate);
    add_scaled(params.classifier.kernel.values(), grads.params.classifier.kernel.values(), -learning_rate);
    add_scaled(params.classifier.bias, grads.params.classifier.bias, -learning_rate);
    add_scaled(heads.global.weight.values(), grads.heads.global.weight.values(), -learning_rate);
    add_scaled(heads.global.bias, grads.heads.global.bias, -learning_rate);
    for (std::size_t k = 0; k < heads.parts.size(); ++k) {
        add_scaled(heads.parts[k].weight.values(), grads.heads.parts[k].weight.values(), -learning_rate);
        add_scaled(heads.parts[k].bias, grads.heads.parts[k].bias, -learning_rate);
    }
}

}  // namespace scwm

// Command-line front end: synth, cluster, train, eval, pipeline.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "scwm/artifacts.hpp"
#include "scwm/config.hpp"
#include "scwm/id_clustering.hpp"
#include "scwm/pipeline.hpp"
#include "scwm/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace scwm;

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("-c,--config", opts.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", opts.overrides, "override one field, key=value (repeatable)");
}

PipelineConfig resolve_config(const CommonOptions& opts) {
    PipelineConfig config = opts.config_path.empty() ? PipelineConfig{} : config_load(opts.config_path);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
        config_set(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.validate();
    return config;
}

ModelParams params_from(const std::string& checkpoint, const PipelineConfig& config) {
    return checkpoint.empty() ? initial_params(config) : load_checkpoint(checkpoint).params;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised re-identification with part parsing and a weighted memory bank"};
    app.require_subcommand(1);

    CommonOptions synth_opts, cluster_opts, train_opts, eval_opts, pipe_opts;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
    add_common(synth, synth_opts);
    synth->add_option("-o,--out", synth_out, "output directory")->required();

    std::string cluster_data, cluster_out, cluster_ckpt, cluster_prev, cluster_features;
    std::size_t cluster_epoch = 0;
    auto* cluster = app.add_subcommand("cluster", "clustering stage: pseudo labels, pseudo masks, memory bank");
    add_common(cluster, cluster_opts);
    cluster->add_option("-d,--data", cluster_data, "dataset directory");
    cluster->add_option("-o,--out", cluster_out, "output directory (or labels file with --features)")->required();
    cluster->add_option("--checkpoint", cluster_ckpt, "checkpoint directory; initial parameters when omitted");
    cluster->add_option("--previous", cluster_prev, "previous clustering directory, for mask smoothing");
    cluster->add_option("--epoch", cluster_epoch, "epoch index selecting the smoothing factor");
    cluster->add_option("--features", cluster_features, "N×D tensor file: only pseudo-label these features");

    std::string train_data, train_clusters, train_ckpt, train_out;
    std::size_t train_epoch = 0;
    auto* train = app.add_subcommand("train", "training stage over one clustering output");
    add_common(train, train_opts);
    train->add_option("-d,--data", train_data, "dataset directory")->required();
    train->add_option("--clusters", train_clusters, "clustering directory")->required();
    train->add_option("--checkpoint", train_ckpt, "checkpoint directory; initial parameters when omitted");
    train->add_option("--epoch", train_epoch, "epoch index seeding the batch sampler");
    train->add_option("-o,--out", train_out, "output checkpoint directory")->required();

    std::string eval_data, eval_ckpt, eval_out;
    auto* eval = app.add_subcommand("eval", "metrics report");
    add_common(eval, eval_opts);
    eval->add_option("-d,--data", eval_data, "dataset directory")->required();
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory; initial parameters when omitted");
    eval->add_option("-o,--out", eval_out, "report file (stdout when omitted)");

    std::string pipe_out;
    auto* pipe = app.add_subcommand("pipeline", "full alternating clustering/training loop on synthetic data");
    add_common(pipe, pipe_opts);
    pipe->add_option("-o,--out", pipe_out, "output directory (log, report, checkpoint)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto config = resolve_config(synth_opts);
            save_dataset(synth_out, synth_generate(config.synth, config.seed));
        } else if (cluster->parsed()) {
            const auto config = resolve_config(cluster_opts);
            if (!cluster_features.empty()) {
                const Tensor features = tensor_read(cluster_features);
                if (features.rank() != 2) throw std::invalid_argument("--features expects an N×D tensor");
                std::vector<Vec> rows;
                for (std::size_t i = 0; i < features.dim(0); ++i)
                    rows.push_back(l2_normalize(features.slice(i)));
                const auto labels = pseudo_labels(rows, config);
                std::ofstream out(cluster_out);
                for (int l : labels.labels) out << l << '\n';
                std::cout << "clusters=" << labels.num_clusters << " outliers=" << labels.outliers() << '\n';
            } else {
                if (cluster_data.empty()) throw std::invalid_argument("cluster needs --data or --features");
                const Dataset data = load_dataset(cluster_data);
                std::vector<PartMask> prev;
                if (!cluster_prev.empty()) prev = load_clustering(cluster_prev).smoothed;
                const auto out = clustering_stage(data, params_from(cluster_ckpt, config), config, prev,
                                                  config.gamma_at(cluster_epoch));
                save_clustering(cluster_out, out, config.parts);
                std::cout << "clusters=" << out.labels.num_clusters << " outliers=" << out.labels.outliers() << '\n';
            }
        } else if (train->parsed()) {
            const auto config = resolve_config(train_opts);
            const Dataset data = load_dataset(train_data);
            ClusteringOutput clusters = load_clustering(train_clusters);
            Checkpoint ckpt;
            ckpt.params = params_from(train_ckpt, config);
            ckpt.bank = clusters.bank;
            ckpt.heads = Heads::from_bank(ckpt.bank, config.head_scale);
            const auto report =
                training_stage(data, clusters, ckpt.bank, ckpt.params, ckpt.heads, config, train_epoch);
            save_checkpoint(train_out, ckpt);
            std::cout << "loss_scc=" << report.mean_terms.scc << " loss_wm=" << report.mean_terms.wm
                      << " loss_id=" << report.mean_terms.id << '\n';
        } else if (eval->parsed()) {
            const auto config = resolve_config(eval_opts);
            const Dataset data = load_dataset(eval_data);
            const std::string line = format_report(evaluate(data, params_from(eval_ckpt, config), config));
            if (eval_out.empty()) {
                std::cout << line << '\n';
            } else {
                std::ofstream(eval_out) << line << '\n';
            }
        } else if (pipe->parsed()) {
            const auto config = resolve_config(pipe_opts);
            const auto result = run_pipeline(config, pipe_out);
            for (const auto& line : result.log) std::cout << line << '\n';
            std::cout << "final " << format_report(result.final_report) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scwm/memory_bank.hpp"
#include "scwm/model.hpp"
#include "scwm/synthetic.hpp"

namespace scwm {

struct PipelineConfig {
    std::uint64_t seed = 7;
    SyntheticConfig synth;

    std::size_t parts = 4;  // l, background included
    std::size_t feature_dim = 32;
    double eta = 0.0;  // spatial threshold; 0 selects default_eta(H, W)

    double gamma = 0.2;                   // mask smoothing at epoch 0
    std::size_t gamma_decay_epochs = 20;  // gamma falls linearly to 0 at this epoch

    double momentum = 0.2;
    double temperature = 0.05;
    double beta = 0.35;
    UpdateStrategy strategy = UpdateStrategy::kWeighted;

    int difficulty_k = 20;
    int k1 = 12;
    int k2 = 1;
    int min_samples = 4;
    double eps = 0.5;

    std::size_t epochs = 12;
    std::size_t iterations = 20;
    std::size_t batch_ids = 4;        // P identities per batch
    std::size_t batch_instances = 4;  // K samples per identity
    double learning_rate = 0.2;
    double head_scale = 1.0 / 0.05;  // heads start as centroids / τ
    double classifier_init = 0.05;
    std::size_t monitor_epochs = 3;  // window of the mask-agreement monitor

    LossSwitches losses;

    // Throws std::invalid_argument naming the offending key.
    void validate() const;
    double resolved_eta() const;
    double gamma_at(std::size_t epoch) const;
};

// Sets one field from its text value; throws std::invalid_argument on unknown key or bad value.
void config_set(PipelineConfig& config, const std::string& key, const std::string& value);
std::string config_get(const PipelineConfig& config, const std::string& key);
std::vector<std::string> config_keys();

// "key = value" lines; '#' starts a comment; blank lines ignored.
void config_parse(PipelineConfig& config, std::istream& in);
PipelineConfig config_load(const std::string& path);
// Every key in canonical order; parses back to an equal configuration.
std::string config_dump(const PipelineConfig& config);

}  // namespace scwm

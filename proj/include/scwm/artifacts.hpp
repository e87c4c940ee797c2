#pragma once

#include <filesystem>

#include "scwm/memory_bank.hpp"
#include "scwm/model.hpp"
#include "scwm/synthetic.hpp"

namespace scwm {

struct ClusteringOutput;

// Directory layout: dataset.txt manifest, signatures.tensor, samples/NNNN_{input,mask}.tensor.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

struct Checkpoint {
    ModelParams params;
    Heads heads;      // absent (no classes) before the first training stage
    MemoryBank bank;  // likewise
};

// manifest.txt lists one "tensor <name> <file>" record per tensor plus bank settings.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// masks/NNNN.tensor (smoothed masks), raw/NNNN.tensor (fresh masks), labels.txt,
// scores.tensor, bank tensors, and manifest.txt with one record per sample.
void save_clustering(const std::filesystem::path& dir, const ClusteringOutput& clusters, std::size_t parts);
ClusteringOutput load_clustering(const std::filesystem::path& dir);

}  // namespace scwm

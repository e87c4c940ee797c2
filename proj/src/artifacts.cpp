#include "scwm/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "scwm/config.hpp"
#include "scwm/pipeline.hpp"
#include "scwm/tensor_io.hpp"

namespace fs = std::filesystem;

namespace scwm {

namespace {

std::string numbered(std::size_t i, const char* suffix) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu%s", i, suffix);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Tensor vec_tensor(const Vec& v) { return Tensor({v.size()}, v); }

Vec tensor_vec(const Tensor& t) {
    if (t.rank() != 1) throw std::runtime_error("artifact: expected a rank-1 tensor");
    return t.raw();
}

Tensor rows_tensor(const std::vector<Vec>& rows) {
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    Tensor out({rows.size(), dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim) throw std::invalid_argument("artifact: ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), out.slice(i).begin());
    }
    return out;
}

std::vector<Vec> tensor_rows(const Tensor& t) {
    if (t.rank() != 2) throw std::runtime_error("artifact: expected a rank-2 tensor");
    std::vector<Vec> rows;
    for (std::size_t i = 0; i < t.dim(0); ++i) rows.emplace_back(t.slice(i).begin(), t.slice(i).end());
    return rows;
}

// "key=value" tokens of one manifest line.
std::map<std::string, std::string> fields_of(const std::string& line) {
    std::map<std::string, std::string> out;
    std::istringstream in(line);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        out[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return out;
}

const std::string& need(const std::map<std::string, std::string>& f, const std::string& key) {
    const auto it = f.find(key);
    if (it == f.end()) throw std::runtime_error("artifact: manifest record lacks " + key);
    return it->second;
}

std::ifstream open_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("artifact: cannot open " + path.string());
    return in;
}

std::ofstream create_text(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("artifact: cannot create " + path.string());
    return out;
}

void write_bank(const fs::path& dir, const MemoryBank& bank, std::ostream& manifest) {
    manifest << "bank momentum=" << format_double(bank.momentum) << " temperature="
             << format_double(bank.temperature) << " strategy=" << to_string(bank.strategy)
             << " spaces=" << bank.spaces() << '\n';
    for (std::size_t s = 0; s < bank.spaces(); ++s) {
        const std::string name = "bank_space" + std::to_string(s) + ".tensor";
        tensor_write(dir / name, rows_tensor(bank.centroids[s]));
        manifest << "tensor name=bank.space" << s << " file=" << name << '\n';
    }
}

}  // namespace

void save_dataset(const fs::path& dir, const Dataset& data) {
    fs::create_directories(dir / "samples");
    PipelineConfig holder;
    holder.synth = data.config;
    auto out = create_text(dir / "dataset.txt");
    for (const auto& key : config_keys())
        if (key.rfind("synth.", 0) == 0) out << "config " << key << "=" << config_get(holder, key) << '\n';
    std::vector<Vec> sig_rows;
    for (const auto& id : data.signatures)
        for (const auto& part : id) sig_rows.push_back(part);
    tensor_write(dir / "signatures.tensor", rows_tensor(sig_rows));
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.samples[i];
        const std::string input = "samples/" + numbered(i, "_input.tensor");
        const std::string mask = "samples/" + numbered(i, "_mask.tensor");
        tensor_write(dir / input, s.input);
        tensor_write(dir / mask, s.gt_mask);
        out << "sample id=" << i << " identity=" << s.identity << " camera=" << s.camera << " offset=" << s.offset
            << " input=" << input << " mask=" << mask << '\n';
    }
    if (!out) throw std::runtime_error("artifact: write failed for " + (dir / "dataset.txt").string());
}

Dataset load_dataset(const fs::path& dir) {
    auto in = open_text(dir / "dataset.txt");
    PipelineConfig holder;
    Dataset data;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream head(line);
        std::string kind;
        head >> kind;
        if (kind == "config") {
            std::string kv;
            head >> kv;
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::runtime_error("artifact: bad config record");
            config_set(holder, kv.substr(0, eq), kv.substr(eq + 1));
        } else if (kind == "sample") {
            const auto f = fields_of(line);
            SyntheticSample s;
            s.identity = std::stoi(need(f, "identity"));
            s.camera = std::stoi(need(f, "camera"));
            s.offset = std::stoi(need(f, "offset"));
            s.input = tensor_read(dir / need(f, "input"));
            s.gt_mask = tensor_read(dir / need(f, "mask"));
            data.samples.push_back(std::move(s));
        }
    }
    data.config = holder.synth;
    const auto sig = tensor_rows(tensor_read(dir / "signatures.tensor"));
    const std::size_t parts = data.config.parts;
    if (parts == 0 || sig.size() % parts != 0) throw std::runtime_error("artifact: signature count mismatch");
    for (std::size_t i = 0; i < sig.size(); i += parts)
        data.signatures.emplace_back(sig.begin() + static_cast<std::ptrdiff_t>(i),
                                     sig.begin() + static_cast<std::ptrdiff_t>(i + parts));
    return data;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& c) {
    fs::create_directories(dir);
    auto manifest = create_text(dir / "manifest.txt");
    const auto put = [&](const std::string& name, const Tensor& t) {
        const std::string file = name + ".tensor";
        tensor_write(dir / file, t);
        manifest << "tensor name=" << name << " file=" << file << '\n';
    };
    put("extractor.weight", c.params.extractor.weight);
    put("extractor.bias", vec_tensor(c.params.extractor.bias));
    put("classifier.kernel", c.params.classifier.kernel);
    put("classifier.bias", vec_tensor(c.params.classifier.bias));
    if (c.heads.global.classes() > 0) {
        put("head.global.weight", c.heads.global.weight);
        put("head.global.bias", vec_tensor(c.heads.global.bias));
        for (std::size_t k = 0; k < c.heads.parts.size(); ++k) {
            put("head.part" + std::to_string(k) + ".weight", c.heads.parts[k].weight);
            put("head.part" + std::to_string(k) + ".bias", vec_tensor(c.heads.parts[k].bias));
        }
    }
    if (c.bank.spaces() > 0) write_bank(dir, c.bank, manifest);
    if (!manifest) throw std::runtime_error("artifact: write failed for checkpoint manifest");
}

namespace {

struct ManifestData {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> bank;
};

ManifestData read_manifest(const fs::path& dir) {
    auto in = open_text(dir / "manifest.txt");
    ManifestData m;
    std::string line;
    while (std::getline(in, line)) {
        const auto f = fields_of(line);
        if (line.rfind("tensor ", 0) == 0) m.tensors[need(f, "name")] = tensor_read(dir / need(f, "file"));
        else if (line.rfind("bank ", 0) == 0) m.bank = f;
    }
    return m;
}

const Tensor& tensor_named(const ManifestData& m, const std::string& name) {
    const auto it = m.tensors.find(name);
    if (it == m.tensors.end()) throw std::runtime_error("artifact: missing tensor " + name);
    return it->second;
}

MemoryBank read_bank(const ManifestData& m) {
    MemoryBank bank;
    if (m.bank.empty()) return bank;
    bank.momentum = std::stod(need(m.bank, "momentum"));
    bank.temperature = std::stod(need(m.bank, "temperature"));
    bank.strategy = parse_update_strategy(need(m.bank, "strategy"));
    const auto spaces = static_cast<std::size_t>(std::stoul(need(m.bank, "spaces")));
    for (std::size_t s = 0; s < spaces; ++s)
        bank.centroids.push_back(tensor_rows(tensor_named(m, "bank.space" + std::to_string(s))));
    return bank;
}

}  // namespace

Checkpoint load_checkpoint(const fs::path& dir) {
    const auto m = read_manifest(dir);
    Checkpoint c;
    c.params.extractor.weight = tensor_named(m, "extractor.weight");
    c.params.extractor.bias = tensor_vec(tensor_named(m, "extractor.bias"));
    c.params.classifier.kernel = tensor_named(m, "classifier.kernel");
    c.params.classifier.bias = tensor_vec(tensor_named(m, "classifier.bias"));
    if (m.tensors.count("head.global.weight") != 0) {
        c.heads.global.weight = tensor_named(m, "head.global.weight");
        c.heads.global.bias = tensor_vec(tensor_named(m, "head.global.bias"));
        for (std::size_t k = 0; m.tensors.count("head.part" + std::to_string(k) + ".weight") != 0; ++k) {
            LinearHead h;
            h.weight = tensor_named(m, "head.part" + std::to_string(k) + ".weight");
            h.bias = tensor_vec(tensor_named(m, "head.part" + std::to_string(k) + ".bias"));
            c.heads.parts.push_back(std::move(h));
        }
    }
    c.bank = read_bank(m);
    return c;
}

void save_clustering(const fs::path& dir, const ClusteringOutput& clusters, std::size_t parts) {
    fs::create_directories(dir / "masks");
    fs::create_directories(dir / "raw");
    auto manifest = create_text(dir / "manifest.txt");
    const std::size_t n = clusters.smoothed.size();
    manifest << "clustering samples=" << n << " clusters=" << clusters.labels.num_clusters << " eta="
             << format_double(clusters.eta) << " l=" << parts << '\n';
    Tensor scores({n, 1 + 2 * parts});
    for (std::size_t i = 0; i < n; ++i) {
        const std::string mask = "masks/" + numbered(i, ".tensor");
        const std::string raw = "raw/" + numbered(i, ".tensor");
        tensor_write(dir / mask, clusters.smoothed[i]);
        tensor_write(dir / raw, clusters.masks[i]);
        manifest << "sample id=" << i << " label=" << clusters.labels.labels[i] << " mask=" << mask
                 << " raw=" << raw << " eta=" << format_double(clusters.eta) << " l=" << parts << '\n';
        const auto& s = clusters.scores[i];
        scores.at(i, 0) = s.alpha_g;
        for (std::size_t k = 0; k < parts; ++k) {
            scores.at(i, 1 + k) = s.alpha_p.at(k);
            scores.at(i, 1 + parts + k) = s.part_valid.at(k) ? 1.0 : 0.0;
        }
    }
    tensor_write(dir / "scores.tensor", scores);
    manifest << "tensor name=scores file=scores.tensor\n";
    write_bank(dir, clusters.bank, manifest);
    if (!manifest) throw std::runtime_error("artifact: write failed for clustering manifest");
}

ClusteringOutput load_clustering(const fs::path& dir) {
    const auto m = read_manifest(dir);
    ClusteringOutput out;
    auto in = open_text(dir / "manifest.txt");
    std::string line;
    std::size_t parts = 0;
    while (std::getline(in, line)) {
        const auto f = fields_of(line);
        if (line.rfind("clustering ", 0) == 0) {
            out.labels.num_clusters = std::stoul(need(f, "clusters"));
            out.eta = std::stod(need(f, "eta"));
            parts = std::stoul(need(f, "l"));
        } else if (line.rfind("sample ", 0) == 0) {
            out.labels.labels.push_back(std::stoi(need(f, "label")));
            out.smoothed.push_back(tensor_read(dir / need(f, "mask")));
            out.masks.push_back(tensor_read(dir / need(f, "raw")));
        }
    }
    const Tensor& scores = tensor_named(m, "scores");
    if (scores.rank() != 2 || scores.dim(0) != out.smoothed.size() || scores.dim(1) != 1 + 2 * parts)
        throw std::runtime_error("artifact: score tensor shape mismatch");
    for (std::size_t i = 0; i < scores.dim(0); ++i) {
        DifficultyScores s;
        s.alpha_g = scores.at(i, 0);
        for (std::size_t k = 0; k < parts; ++k) {
            s.alpha_p.push_back(scores.at(i, 1 + k));
            s.part_valid.push_back(scores.at(i, 1 + parts + k) != 0.0 ? 1 : 0);
        }
        out.scores.push_back(std::move(s));
    }
    out.bank = read_bank(m);
    return out;
}

}  // namespace scwm

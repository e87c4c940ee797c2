#include "scwm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "scwm/scc.hpp"

namespace scwm {

namespace {

struct Field {
    std::string key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    in.imbue(std::locale::classic());
    T out{};
    if constexpr (std::is_unsigned_v<T>) {
        if (!value.empty() && value.front() == '-') bad_value(key, value);
    }
    in >> out;
    if (in.fail() || !in.eof()) bad_value(key, value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value);
}

template <class T>
std::string format_number(T v) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    if constexpr (std::is_floating_point_v<T>)
        out << std::setprecision(std::numeric_limits<T>::max_digits10);
    out << v;
    return out.str();
}

template <class T>
Field number(std::string key, T PipelineConfig::*member) {
    return {key, [key, member](PipelineConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
            [member](const PipelineConfig& c) { return format_number(c.*member); }};
}

template <class T>
Field synth_number(std::string key, T SyntheticConfig::*member) {
    return {key,
            [key, member](PipelineConfig& c, const std::string& v) { c.synth.*member = parse_number<T>(key, v); },
            [member](const PipelineConfig& c) { return format_number(c.synth.*member); }};
}

Field flag(std::string key, bool LossSwitches::*member) {
    return {key, [key, member](PipelineConfig& c, const std::string& v) { c.losses.*member = parse_bool(key, v); },
            [member](const PipelineConfig& c) { return std::string(c.losses.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        number("seed", &PipelineConfig::seed),
        synth_number("synth.identities", &SyntheticConfig::identities),
        synth_number("synth.samples_per_identity", &SyntheticConfig::samples_per_identity),
        synth_number("synth.input_channels", &SyntheticConfig::input_channels),
        synth_number("synth.height", &SyntheticConfig::height),
        synth_number("synth.width", &SyntheticConfig::width),
        synth_number("synth.parts", &SyntheticConfig::parts),
        synth_number("synth.cameras", &SyntheticConfig::cameras),
        synth_number("synth.max_offset", &SyntheticConfig::max_offset),
        synth_number("synth.part_norm", &SyntheticConfig::part_norm),
        synth_number("synth.identity_norm", &SyntheticConfig::identity_norm),
        synth_number("synth.camera_noise", &SyntheticConfig::camera_noise),
        synth_number("synth.pixel_noise", &SyntheticConfig::pixel_noise),
        synth_number("synth.background_noise", &SyntheticConfig::background_noise),
        synth_number("synth.salient_gain", &SyntheticConfig::salient_gain),
        synth_number("synth.salient_fraction", &SyntheticConfig::salient_fraction),
        number("parts", &PipelineConfig::parts),
        number("feature_dim", &PipelineConfig::feature_dim),
        number("eta", &PipelineConfig::eta),
        number("gamma", &PipelineConfig::gamma),
        number("gamma_decay_epochs", &PipelineConfig::gamma_decay_epochs),
        number("momentum", &PipelineConfig::momentum),
        number("temperature", &PipelineConfig::temperature),
        number("beta", &PipelineConfig::beta),
        {"strategy", [](PipelineConfig& c, const std::string& v) { c.strategy = parse_update_strategy(v); },
         [](const PipelineConfig& c) { return std::string(to_string(c.strategy)); }},
        number("difficulty_k", &PipelineConfig::difficulty_k),
        number("k1", &PipelineConfig::k1),
        number("k2", &PipelineConfig::k2),
        number("min_samples", &PipelineConfig::min_samples),
        number("eps", &PipelineConfig::eps),
        number("epochs", &PipelineConfig::epochs),
        number("iterations", &PipelineConfig::iterations),
        number("batch_ids", &PipelineConfig::batch_ids),
        number("batch_instances", &PipelineConfig::batch_instances),
        number("learning_rate", &PipelineConfig::learning_rate),
        number("head_scale", &PipelineConfig::head_scale),
        number("classifier_init", &PipelineConfig::classifier_init),
        number("monitor_epochs", &PipelineConfig::monitor_epochs),
        flag("loss.parsing", &LossSwitches::parsing),
        flag("loss.diversity", &LossSwitches::diversity),
        flag("loss.wnce", &LossSwitches::wnce),
        flag("loss.sep", &LossSwitches::sep),
        flag("loss.id", &LossSwitches::id),
    };
    return table;
}

const Field& field(const std::string& key) {
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw std::invalid_argument("config: unknown key " + key);
    return *it;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void require(bool ok, const char* key, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + key + " " + what);
}

}  // namespace

void PipelineConfig::validate() const {
    const auto& s = synth;
    require(s.identities >= 2, "synth.identities", "must be at least 2");
    require(s.samples_per_identity >= 2, "synth.samples_per_identity", "must be at least 2");
    require(s.input_channels >= 1, "synth.input_channels", "must be positive");
    require(s.parts >= 1, "synth.parts", "must be positive");
    require(s.cameras >= 2, "synth.cameras", "must be at least 2 for a query/gallery split");
    require(s.max_offset >= 0, "synth.max_offset", "must be non-negative");
    require(s.height >= 2 * s.parts + 2 && s.width >= 4, "synth.height", "grid too small");
    require(s.salient_fraction >= 0.0 && s.salient_fraction <= 1.0, "synth.salient_fraction", "outside [0,1]");
    require(s.pixel_noise >= 0.0 && s.background_noise >= 0.0 && s.camera_noise >= 0.0, "synth.pixel_noise",
            "noise must be non-negative");
    require(parts == s.parts + 1, "parts", "must equal synth.parts + 1");
    require(parts <= 8, "parts", "at most 8");
    require(feature_dim >= 1, "feature_dim", "must be positive");
    require(eta >= 0.0 && std::isfinite(eta), "eta", "must be finite and non-negative");
    require(gamma >= 0.0 && gamma <= 1.0, "gamma", "outside [0,1]");
    require(momentum >= 0.0 && momentum <= 1.0, "momentum", "outside [0,1]");
    require(temperature > 0.0, "temperature", "must be positive");
    require(beta >= 0.0 && beta <= 1.0, "beta", "outside [0,1]");
    require(difficulty_k >= 1, "difficulty_k", "must be positive");
    require(k1 >= 2, "k1", "must be at least 2");
    require(k2 >= 1, "k2", "must be positive");
    require(min_samples >= 1, "min_samples", "must be positive");
    require(eps > 0.0, "eps", "must be positive");
    require(iterations >= 1, "iterations", "must be positive");
    require(batch_ids >= 1 && batch_instances >= 1, "batch_ids", "batch must be non-empty");
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate", "must be finite and non-negative");
    require(head_scale > 0.0, "head_scale", "must be positive");
    require(classifier_init >= 0.0, "classifier_init", "must be non-negative");
}

double PipelineConfig::resolved_eta() const { return eta > 0.0 ? eta : default_eta(synth.height, synth.width); }

double PipelineConfig::gamma_at(std::size_t epoch) const {
    if (gamma_decay_epochs == 0 || epoch >= gamma_decay_epochs) return 0.0;
    return gamma * (1.0 - static_cast<double>(epoch) / static_cast<double>(gamma_decay_epochs));
}

void config_set(PipelineConfig& config, const std::string& key, const std::string& value) {
    field(key).set(config, trim(value));
}

std::string config_get(const PipelineConfig& config, const std::string& key) { return field(key).get(config); }

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void config_parse(PipelineConfig& config, std::istream& in) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(number) + " lacks '='");
        config_set(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

PipelineConfig config_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    PipelineConfig config;
    config_parse(config, in);
    return config;
}

std::string config_dump(const PipelineConfig& config) {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
    return out;
}

}  // namespace scwm

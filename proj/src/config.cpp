#include "condseg/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "condseg/error.hpp"

namespace condseg {

namespace {
std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}
}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_string(ss.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
    KeyValueFile kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv.values_[key] = val;
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueFile::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long KeyValueFile::get_int(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stol(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
    }
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
    }
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + it->second + "'");
}

std::vector<std::string> KeyValueFile::get_list(const std::string& key,
                                                const std::vector<std::string>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

void KeyValueFile::check_known(const std::vector<std::string>& known) const {
    for (const auto& [key, _] : values_) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config key: " + key);
    }
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string> kKnownKeys = {
    "dataset.root",        "dataset.kind",        "dataset.cache",
    "dataset.per_volume_z", "dataset.label.background", "dataset.label.rv",
    "dataset.label.myo",   "dataset.label.lv",
    "preprocess.target_spacing", "preprocess.out_height", "preprocess.out_width",
    "preprocess.clip_sigma",
    "grid.architectures",  "grid.variants",       "grid.fractions",    "grid.repeats",
    "train.learning_rate", "train.focal_gamma",   "train.max_epochs",  "train.patience",
    "train.batch_size",    "train.monitor",
    "backbone.depth",      "backbone.base_channels", "backbone.bn_momentum",
    "synth.subjects",      "synth.slices",        "synth.blur_sigma",  "synth.noise_sigma",
    "seed",                "output",              "jobs",
};
}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_kv(KeyValueFile::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueFile& kv) {
    kv.check_known(kKnownKeys);
    ExperimentConfig c;
    c.dataset_root = kv.get("dataset.root", c.dataset_root);
    const std::string kind = kv.get("dataset.kind", "synthetic");
    if (kind == "acdc")
        c.dataset_kind = DatasetKind::acdc;
    else if (kind == "synthetic")
        c.dataset_kind = DatasetKind::synthetic;
    else
        throw ConfigError("dataset.kind must be acdc or synthetic");
    c.cache_dir = kv.get("dataset.cache", "");
    c.prepare.preprocess.per_volume_z = kv.get_bool("dataset.per_volume_z", false);
    c.prepare.labels.background = static_cast<int>(kv.get_int("dataset.label.background", 0));
    c.prepare.labels.rv = static_cast<int>(kv.get_int("dataset.label.rv", 1));
    c.prepare.labels.myo = static_cast<int>(kv.get_int("dataset.label.myo", 2));
    c.prepare.labels.lv = static_cast<int>(kv.get_int("dataset.label.lv", 3));
    c.prepare.preprocess.target_spacing =
        kv.get_double("preprocess.target_spacing", c.prepare.preprocess.target_spacing);
    c.prepare.preprocess.out_height =
        static_cast<int>(kv.get_int("preprocess.out_height", c.prepare.preprocess.out_height));
    c.prepare.preprocess.out_width =
        static_cast<int>(kv.get_int("preprocess.out_width", c.prepare.preprocess.out_width));
    c.prepare.preprocess.clip_sigma =
        kv.get_double("preprocess.clip_sigma", c.prepare.preprocess.clip_sigma);

    c.architectures = kv.get_list("grid.architectures", c.architectures);
    c.variants = kv.get_list("grid.variants", c.variants);
    if (kv.has("grid.fractions")) {
        c.fractions.clear();
        for (const auto& f : kv.get_list("grid.fractions", {})) c.fractions.push_back(std::stod(f));
    }
    c.repeats = static_cast<int>(kv.get_int("grid.repeats", c.repeats));

    c.train.learning_rate = kv.get_double("train.learning_rate", c.train.learning_rate);
    c.train.focal_gamma = kv.get_double("train.focal_gamma", c.train.focal_gamma);
    c.train.max_epochs = static_cast<int>(kv.get_int("train.max_epochs", c.train.max_epochs));
    c.train.patience = static_cast<int>(kv.get_int("train.patience", c.train.patience));
    c.train.batch_size = static_cast<int>(kv.get_int("train.batch_size", c.train.batch_size));
    const std::string mon = kv.get("train.monitor", "dice");
    if (mon == "dice")
        c.train.monitor = Monitor::val_dice;
    else if (mon == "loss")
        c.train.monitor = Monitor::val_loss;
    else
        throw ConfigError("train.monitor must be dice or loss");

    c.backbone.depth = static_cast<int>(kv.get_int("backbone.depth", c.backbone.depth));
    c.backbone.base_channels =
        static_cast<int>(kv.get_int("backbone.base_channels", c.backbone.base_channels));
    c.backbone.bn_momentum = kv.get_double("backbone.bn_momentum", c.backbone.bn_momentum);

    c.synth.n_subjects = static_cast<int>(kv.get_int("synth.subjects", c.synth.n_subjects));
    c.synth.slices_per_volume = static_cast<int>(kv.get_int("synth.slices", c.synth.slices_per_volume));
    c.synth.blur_sigma = kv.get_double("synth.blur_sigma", c.synth.blur_sigma);
    c.synth.noise_sigma = kv.get_double("synth.noise_sigma", c.synth.noise_sigma);

    c.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<long>(c.seed)));
    c.output_dir = kv.get("output", c.output_dir);
    c.jobs = static_cast<int>(kv.get_int("jobs", c.jobs));
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (architectures.empty()) throw ConfigError("config: no architectures selected");
    for (const auto& a : architectures) architecture_from_string(a);
    if (variants.empty()) throw ConfigError("config: no variants selected");
    const auto& known = FusionSpec::variant_ids();
    for (const auto& v : variants)
        if (std::find(known.begin(), known.end(), v) == known.end())
            throw ConfigError("config: unknown variant " + v);
    if (fractions.empty()) throw ConfigError("config: no fractions selected");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("config: fractions must be in (0, 1]");
    if (repeats < 1) throw ConfigError("config: repeats must be >= 1");
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
    train.validate();
    backbone.validate();
}

std::string ExperimentConfig::resolved_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    return (std::filesystem::path(output_dir) / "cache").string();
}

}  // namespace condseg

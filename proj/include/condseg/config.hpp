#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "condseg/cache.hpp"
#include "condseg/model.hpp"
#include "condseg/synthetic.hpp"
#include "condseg/trainer.hpp"

namespace condseg {

// Flat `key = value` configuration text with dotted section names and `#`
// comments. Unknown keys are rejected so typos fail loudly.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // Throws ConfigError if any key is not in the known set.
    void check_known(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

enum class DatasetKind { acdc, synthetic };

struct ExperimentConfig {
    std::string dataset_root;
    DatasetKind dataset_kind = DatasetKind::synthetic;
    std::string cache_dir;   // default: <output>/cache
    std::string output_dir = "runs";

    std::vector<std::string> architectures = {"unet", "encoder_decoder"};
    std::vector<std::string> variants = FusionSpec::variant_ids();
    std::vector<double> fractions = {1.0, 0.25, 0.06, 0.015};
    int repeats = 3;
    uint64_t seed = 1234;
    int jobs = 1;

    TrainConfig train;
    BackboneConfig backbone;
    PrepareOptions prepare;
    SyntheticConfig synth;

    void validate() const;
    std::string resolved_cache_dir() const;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_kv(const KeyValueFile& kv);
};

}  // namespace condseg

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rsflow/augment.hpp"
#include "rsflow/flowmatch.hpp"
#include "rsflow/toyspeech.hpp"
#include "rsflow/vectorfield.hpp"

namespace rsflow {

enum class Variant { Baseline, Contrastive, Robust };

const char* to_string(Variant v);
Variant parse_variant(std::string_view s);

/// Loss weights of the three-way ablation.
LossWeights weights_for(Variant v);

struct EvalConfig {
    std::vector<int> nfe{12, 24};
    std::vector<std::uint64_t> seeds{1, 2};
    double cfg_weight = 3.0;
};

struct RunConfig {
    Variant variant = Variant::Robust;
    LossWeights weights = LossWeights::robust();
    ModelConfig model;
    AugmentConfig augment;
    DatasetConfig data;
    AdamConfig optimizer;
    EvalConfig eval;
    std::uint64_t total_steps = 20000;
    std::uint64_t eval_every = 1000;
    std::uint64_t log_every = 100;
    std::uint64_t checkpoint_every = 5000;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool write_train_set = false;
    std::filesystem::path output_dir = "run";

    /// Keys that appeared in the parsed file.
    std::set<std::string> explicit_keys;

    /// Copies data-derived sizes into the model and augment sections.
    void sync_derived();
    void validate() const;
};

/// Parses flat `key = value` text with `#` comments. `variant` is required;
/// every other key falls back to its default. Loss weights follow the
/// variant unless `lambda_rand` / `lambda_aug` are given.
RunConfig parse_config_text(std::string_view text, const std::string& source = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

/// Every key with its resolved value; keys whose value differs from the
/// default (or from the variant's weights) carry a `# override` marker.
std::string echo_config(const RunConfig& cfg);

/// Names of all recognised keys, in echo order.
std::vector<std::string> config_keys();

}  // namespace rsflow

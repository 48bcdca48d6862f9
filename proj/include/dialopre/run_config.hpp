#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dialopre/model.hpp"
#include "dialopre/objectives.hpp"

namespace dialopre {

// Flat key = value run configuration. Every field has a default, so an empty
// file (or none at all) is a complete configuration; unknown keys are
// rejected. Precedence: command-line overrides > config file > defaults.
struct RunConfig {
    std::uint64_t seed = 1;

    // Paths.
    std::string corpus_dir = "corpus";
    std::string out_dir = "out";
    std::string checkpoint;  // empty -> <out_dir>/pretrain/model.ckpt

    // Model geometry (mirrors ModelConfig; vocab size comes from the built
    // vocabulary, never from configuration).
    int dim = 32;
    int heads = 2;
    int layers_u = 1;
    int layers_d = 1;
    int layers_dec = 1;
    int max_utt_tokens = 50;
    double dropout = 0.0;

    // Corpus construction.
    long long delta_t_ms = 6000;
    int context_size = 5;  // T
    int stride = 0;        // 0 -> non-overlapping (stride = T)
    int max_contexts_per_conversation = 50;
    double min_conf = 0.9;
    int vocab_max = 4000;
    double holdout = 0.25;  // movie-level eval holdout fraction

    // Objectives.
    double p_omega = 0.15;
    double p_c = 0.2;
    double p_lprime = 0.4;
    std::vector<CorruptionMode> modes = {CorruptionMode::MUG};

    // Optimization.
    double lr = 1e-2;
    int steps = 200;
    int warmup = 20;
    int batch_contexts = 8;

    // Task generation / evaluation.
    int distractors = 9;  // D
    int n_instances = 1000;

    // Applies one key = value assignment; DataError on unknown key or
    // unparseable value.
    void apply(const std::string& key, const std::string& value);

    // Parses a flat config file (blank lines and '#' comments allowed) on top
    // of the current values.
    void apply_file(const std::filesystem::path& path);

    // Applies key=value strings (e.g. from repeated --set flags) on top.
    void apply_overrides(const std::vector<std::string>& assignments);

    void validate() const;  // DataError on out-of-range values

    ModelConfig model_config(int vocab_size) const;

    // Round-trippable snapshot with deterministic key order.
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    bool operator==(const RunConfig&) const = default;
};

// "mug,tmug,mmug" <-> mode list helpers (lowercase canonical form).
std::string modes_to_string(const std::vector<CorruptionMode>& modes);
std::vector<CorruptionMode> modes_from_string(const std::string& s);

}  // namespace dialopre

#pragma once

#include "lsh/corpus.hpp"
#include "lsh/ls_space.hpp"
#include "lsh/model.hpp"
#include "lsh/sparsity.hpp"

#include <cstdint>
#include <string>

namespace lsh {

enum class SamplerKind { tpe, random_search, grid };
enum class Criterion { ls_distance, val_loss };

const char* to_string(SamplerKind k);
const char* to_string(Criterion c);
SamplerKind sampler_from_string(const std::string& s);
Criterion criterion_from_string(const std::string& s);

// Resolved run configuration. Every field is validated against its domain
// before any work starts; unknown config keys are rejected at parse time.
struct RunConfig {
    // corpus
    std::string corpus_path;
    Tokenization tokenization = Tokenization::chars;
    double train_frac = 0.9;
    double val_frac = 0.05;

    // model
    Arch arch = Arch::stacked_lstm;
    long hidden = 64;
    long embedding = 64;
    long layers = 2;
    bool tied = false;
    bool coupled = false;
    double dropout_output = 0.0;

    // pruning
    double sparsity = 0.67;

    // optimizer
    double lr = 2.0;
    double clip = 0.25;
    long nonmono = 5;
    long batch_size = 20;
    long bptt = 35;

    // spectrum estimation
    long ls_samples = 2;  // K
    long ls_steps = 200;  // T
    long ls_warmup = 10;

    // search schedule
    long pool = 8;             // explicit pool size (ignored when budget set)
    std::string budget;        // "", "low" (24), "moderate" (30), "high" (40)
    long epochs_per_event = 3;  // E
    long selection_epochs = 12; // m
    long final_k = 3;
    SamplerKind sampler = SamplerKind::tpe;
    Criterion criterion = Criterion::ls_distance;
    EmbedMethod embed_method = EmbedMethod::pca;
    Metric metric = Metric::l2;
    double grid_death_rate = 0.8;
    long extensive_epochs = 20;  // per-candidate total epoch cap
    long decay_horizon = 0;      // 0 -> extensive_epochs
    long workers = 1;            // 0 -> hardware concurrency

    // death-rate axis bounds
    double death_rate_min = 0.4;
    double death_rate_max = 0.9;

    // dense reference
    std::string reference_checkpoint;  // "" -> <out_dir>/dense.ckpt
    bool train_reference = true;
    uint64_t reference_seed = 1234;
    long reference_max_epochs = 40;

    uint64_t seed = 1;
    std::string out_dir = "runs/run";

    long resolved_pool() const;
    long resolved_decay_horizon() const;
    long resolved_workers() const;
    ModelProfile model_profile(Index vocab) const;
};

// Parses the JSON config file; missing keys take defaults, unknown keys
// raise ConfigError naming the key.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);

// "section.key=value" override, same validation as the file path
void apply_override(RunConfig& config, const std::string& assignment);

// full domain validation; throws ConfigError naming the field and domain
void validate(const RunConfig& config);

// resolved config as canonical JSON text (stable key order)
std::string to_json_text(const RunConfig& config);

}  // namespace lsh

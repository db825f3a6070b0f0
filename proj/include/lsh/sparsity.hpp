#pragma once

#include "lsh/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lsh {

enum class InitMode { uniform, er };
enum class DeathMode { magnitude, global_magnitude, set, threshold };
enum class RedistMode { none, magnitude, nonzeros };

const char* to_string(InitMode m);
const char* to_string(DeathMode m);
const char* to_string(RedistMode m);
InitMode init_mode_from_string(const std::string& s);
DeathMode death_mode_from_string(const std::string& s);
RedistMode redist_mode_from_string(const std::string& s);

// One point in the hyperpruning search space.
struct CandidateConfig {
    InitMode init_mode = InitMode::uniform;
    DeathMode death_mode = DeathMode::magnitude;
    RedistMode redist_mode = RedistMode::none;
    double death_rate = 0.5;  // continuous axis, [0.4, 0.9]
    std::string id;
    uint64_t seed = 0;
};

// Per-prunable-layer binary masks (0/1 stored as doubles so they combine
// with weights via cwiseProduct).
struct MaskSet {
    std::vector<Mat> layers;
    double global_sparsity = 0.0;

    long nonzeros(size_t layer) const;
    long total_nonzeros() const;
    long total_weights() const;
};

// Layer-wise density per init mode. uniform: every layer at 1 - sparsity.
// er: density proportional to (n_in + n_out) / (n_in * n_out), scaled to the
// global budget, clipped at 1 with the excess redistributed. Counts are
// trued up so the global budget round((1-s) * total) is hit exactly.
MaskSet sparse_init(const std::vector<Shape>& layer_shapes, InitMode mode,
                    double global_sparsity, uint64_t seed);

struct DeathResult {
    MaskSet masks;
    std::vector<long> removed_per_layer;
};

// Removes floor(rate * nonzeros_l) active weights per layer
// (global_magnitude pools all layers: floor(rate * total)). Ties break by
// (layer, flat index) ascending. Never activates a weight.
DeathResult apply_death(const std::vector<Mat>& weights, const MaskSet& masks,
                        double rate, DeathMode mode);

struct RedistResult {
    std::vector<long> quotas;
    bool fell_back_to_none = false;  // all-zero proportionality weights
};

// Allocates the growth quota across layers. Sum of quotas always equals the
// total removed (largest-remainder rounding). grads is accepted for
// interface parity with gradient-based rules; the implemented modes do not
// read it.
RedistResult redistribute(const std::vector<long>& removed_per_layer,
                          const std::vector<Mat>& weights, const MaskSet& masks,
                          const std::vector<Mat>* grads, RedistMode mode);

// Activates quota_l inactive positions per layer uniformly at random.
// Quota exceeding a layer's inactive capacity spills to the layer with the
// largest remaining capacity. Newly grown weights start at 0 (the training
// loop keeps inactive positions at exactly 0, so growth only flips mask
// bits).
MaskSet grow(const MaskSet& masks, const std::vector<long>& quotas, uint64_t seed);

// rate/2 * (1 + cos(pi * epoch / total)).
double cosine_decay(double initial_rate, long epoch, long total_epochs);

}  // namespace lsh

#include "lsh/sparsity.hpp"

#include "lsh/errors.hpp"
#include "lsh/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace lsh {

const char* to_string(InitMode m) {
    switch (m) {
        case InitMode::uniform: return "uniform";
        case InitMode::er: return "er";
    }
    return "?";
}

const char* to_string(DeathMode m) {
    switch (m) {
        case DeathMode::magnitude: return "magnitude";
        case DeathMode::global_magnitude: return "global_magnitude";
        case DeathMode::set: return "set";
        case DeathMode::threshold: return "threshold";
    }
    return "?";
}

const char* to_string(RedistMode m) {
    switch (m) {
        case RedistMode::none: return "none";
        case RedistMode::magnitude: return "magnitude";
        case RedistMode::nonzeros: return "nonzeros";
    }
    return "?";
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "uniform") return InitMode::uniform;
    if (s == "er") return InitMode::er;
    throw InvalidArgumentError("unknown init mode: " + s + " (allowed: uniform, er)");
}

DeathMode death_mode_from_string(const std::string& s) {
    if (s == "magnitude") return DeathMode::magnitude;
    if (s == "global_magnitude") return DeathMode::global_magnitude;
    if (s == "set") return DeathMode::set;
    if (s == "threshold") return DeathMode::threshold;
    throw InvalidArgumentError(
        "unknown death mode: " + s +
        " (allowed: magnitude, global_magnitude, set, threshold)");
}

RedistMode redist_mode_from_string(const std::string& s) {
    if (s == "none") return RedistMode::none;
    if (s == "magnitude") return RedistMode::magnitude;
    if (s == "nonzeros") return RedistMode::nonzeros;
    throw InvalidArgumentError("unknown redistribution mode: " + s +
                               " (allowed: none, magnitude, nonzeros)");
}

long MaskSet::nonzeros(size_t layer) const {
    return static_cast<long>(layers[layer].sum());
}

long MaskSet::total_nonzeros() const {
    long n = 0;
    for (const auto& m : layers) n += static_cast<long>(m.sum());
    return n;
}

long MaskSet::total_weights() const {
    long n = 0;
    for (const auto& m : layers) n += static_cast<long>(m.size());
    return n;
}

// ---------------------------------------------------------------------------
// sparse_init
// ---------------------------------------------------------------------------

MaskSet sparse_init(const std::vector<Shape>& layer_shapes, InitMode mode,
                    double global_sparsity, uint64_t seed) {
    if (!(global_sparsity >= 0.0 && global_sparsity < 1.0)) {
        throw InvalidArgumentError("sparse_init: global_sparsity must be in [0, 1), got " +
                                   std::to_string(global_sparsity));
    }
    if (layer_shapes.empty()) throw InvalidArgumentError("sparse_init: no layers");

    const size_t L = layer_shapes.size();
    long total = 0;
    for (const auto& s : layer_shapes) total += s.size();
    const long budget = std::lround((1.0 - global_sparsity) * static_cast<double>(total));

    // per-layer targets
    std::vector<long> target(L, 0);
    if (mode == InitMode::uniform) {
        for (size_t l = 0; l < L; ++l) {
            target[l] = std::lround((1.0 - global_sparsity) *
                                    static_cast<double>(layer_shapes[l].size()));
        }
    } else {
        // er: density_l proportional to (n_in + n_out) / (n_in * n_out),
        // clipped at 1 with the excess redistributed proportionally
        std::vector<double> raw(L);
        for (size_t l = 0; l < L; ++l) {
            double n_out = static_cast<double>(layer_shapes[l].rows);
            double n_in = static_cast<double>(layer_shapes[l].cols);
            raw[l] = (n_in + n_out) / (n_in * n_out);
        }
        std::vector<bool> clipped(L, false);
        std::vector<double> density(L, 1.0);
        long remaining_budget = budget;
        for (;;) {
            double mass = 0.0;
            for (size_t l = 0; l < L; ++l)
                if (!clipped[l]) mass += raw[l] * static_cast<double>(layer_shapes[l].size());
            if (mass <= 0.0) break;
            double alpha = static_cast<double>(remaining_budget) / mass;
            bool newly_clipped = false;
            for (size_t l = 0; l < L; ++l) {
                if (!clipped[l] && alpha * raw[l] >= 1.0) {
                    clipped[l] = true;
                    density[l] = 1.0;
                    remaining_budget -= layer_shapes[l].size();
                    newly_clipped = true;
                }
            }
            if (!newly_clipped) {
                for (size_t l = 0; l < L; ++l)
                    if (!clipped[l]) density[l] = alpha * raw[l];
                break;
            }
        }
        for (size_t l = 0; l < L; ++l) {
            target[l] = clipped[l]
                            ? layer_shapes[l].size()
                            : std::lround(density[l] * static_cast<double>(layer_shapes[l].size()));
            target[l] = std::clamp(target[l], 0L, static_cast<long>(layer_shapes[l].size()));
        }
    }

    // true-up pass: per-layer rounding can miss the global budget by up to
    // one weight per layer; adjust one weight at a time, deterministically
    long diff = budget - std::accumulate(target.begin(), target.end(), 0L);
    while (diff > 0) {
        size_t best = L;
        long best_capacity = 0;
        for (size_t l = 0; l < L; ++l) {
            long cap = layer_shapes[l].size() - target[l];
            if (cap > best_capacity) {
                best_capacity = cap;
                best = l;
            }
        }
        if (best == L) throw CapacityError("sparse_init: budget exceeds total weights");
        ++target[best];
        --diff;
    }
    while (diff < 0) {
        size_t best = L;
        long best_count = 0;
        for (size_t l = 0; l < L; ++l) {
            if (target[l] > best_count) {
                best_count = target[l];
                best = l;
            }
        }
        --target[best];
        ++diff;
    }

    MaskSet masks;
    masks.global_sparsity = global_sparsity;
    for (size_t l = 0; l < L; ++l) {
        const auto& s = layer_shapes[l];
        Mat m = Mat::Zero(s.rows, s.cols);
        Rng rng(derive_seed(seed, "sparse_init", static_cast<uint64_t>(l)));
        auto picks = rng.sample_without_replacement(s.size(), target[l]);
        for (long flat : picks) m(flat / s.cols, flat % s.cols) = 1.0;
        masks.layers.push_back(std::move(m));
    }
    return masks;
}

// ---------------------------------------------------------------------------
// apply_death
// ---------------------------------------------------------------------------

namespace {

struct ActiveWeight {
    double magnitude;
    double value;
    size_t layer;
    long flat;
};

std::vector<ActiveWeight> active_weights(const Mat& w, const Mat& mask, size_t layer) {
    std::vector<ActiveWeight> out;
    const Index cols = w.cols();
    for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < cols; ++c) {
            if (mask(r, c) != 0.0) {
                out.push_back({std::abs(w(r, c)), w(r, c), layer, r * cols + c});
            }
        }
    }
    return out;
}

void kill(MaskSet& masks, size_t layer, long flat) {
    Mat& m = masks.layers[layer];
    m(flat / m.cols(), flat % m.cols()) = 0.0;
}

void sort_by_magnitude(std::vector<ActiveWeight>& v) {
    std::sort(v.begin(), v.end(), [](const ActiveWeight& a, const ActiveWeight& b) {
        return std::tie(a.magnitude, a.layer, a.flat) < std::tie(b.magnitude, b.layer, b.flat);
    });
}

}  // namespace

DeathResult apply_death(const std::vector<Mat>& weights, const MaskSet& masks,
                        double rate, DeathMode mode) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw InvalidArgumentError("apply_death: rate must be in [0, 1], got " +
                                   std::to_string(rate));
    }
    if (weights.size() != masks.layers.size()) {
        throw DimensionError("apply_death: weights/masks layer count mismatch");
    }

    const size_t L = weights.size();
    DeathResult result;
    result.masks = masks;
    result.removed_per_layer.assign(L, 0);

    if (mode == DeathMode::global_magnitude) {
        std::vector<ActiveWeight> all;
        for (size_t l = 0; l < L; ++l) {
            auto layer = active_weights(weights[l], masks.layers[l], l);
            all.insert(all.end(), layer.begin(), layer.end());
        }
        long k = static_cast<long>(std::floor(rate * static_cast<double>(all.size())));
        sort_by_magnitude(all);
        for (long i = 0; i < k; ++i) {
            kill(result.masks, all[static_cast<size_t>(i)].layer, all[static_cast<size_t>(i)].flat);
            ++result.removed_per_layer[all[static_cast<size_t>(i)].layer];
        }
        return result;
    }

    for (size_t l = 0; l < L; ++l) {
        auto active = active_weights(weights[l], masks.layers[l], l);
        const long n = static_cast<long>(active.size());
        const long k = static_cast<long>(std::floor(rate * static_cast<double>(n)));
        if (k == 0) continue;

        std::vector<long> doomed;
        doomed.reserve(static_cast<size_t>(k));

        switch (mode) {
            case DeathMode::magnitude: {
                sort_by_magnitude(active);
                for (long i = 0; i < k; ++i) doomed.push_back(active[static_cast<size_t>(i)].flat);
                break;
            }
            case DeathMode::set: {
                // smallest positives and largest (closest-to-zero) negatives,
                // in equal halves; odd remainder to positives; shortfall in
                // one sign class spills to the other
                std::vector<ActiveWeight> pos, neg;
                for (const auto& a : active) (a.value >= 0.0 ? pos : neg).push_back(a);
                std::sort(pos.begin(), pos.end(), [](const ActiveWeight& a, const ActiveWeight& b) {
                    if (a.value != b.value) return a.value < b.value;
                    return a.flat < b.flat;
                });
                std::sort(neg.begin(), neg.end(), [](const ActiveWeight& a, const ActiveWeight& b) {
                    if (a.value != b.value) return a.value > b.value;
                    return a.flat < b.flat;
                });
                long take_pos = std::min(k / 2 + k % 2, static_cast<long>(pos.size()));
                long take_neg = std::min(k / 2, static_cast<long>(neg.size()));
                // shortfall in one sign class spills to the other
                long shortfall = k - take_pos - take_neg;
                long extra_neg = std::min(shortfall, static_cast<long>(neg.size()) - take_neg);
                take_neg += extra_neg;
                take_pos += std::min(shortfall - extra_neg,
                                     static_cast<long>(pos.size()) - take_pos);
                for (long i = 0; i < take_pos; ++i) doomed.push_back(pos[static_cast<size_t>(i)].flat);
                for (long i = 0; i < take_neg; ++i) doomed.push_back(neg[static_cast<size_t>(i)].flat);
                break;
            }
            case DeathMode::threshold: {
                // quantile cut first, then true the count up or down to k in
                // magnitude order
                std::vector<double> mags;
                mags.reserve(active.size());
                for (const auto& a : active) mags.push_back(a.magnitude);
                std::sort(mags.begin(), mags.end());
                double q = mags[static_cast<size_t>(
                    std::floor(rate * static_cast<double>(n - 1)))];
                sort_by_magnitude(active);
                long below = 0;
                while (below < n && active[static_cast<size_t>(below)].magnitude < q) ++below;
                long take = below;
                if (take < k) take = k;        // extend with next-smallest magnitudes
                else if (take > k) take = k;   // drop the largest members of the cut
                for (long i = 0; i < take; ++i) doomed.push_back(active[static_cast<size_t>(i)].flat);
                break;
            }
            case DeathMode::global_magnitude:
                break;  // handled above
        }

        for (long flat : doomed) kill(result.masks, l, flat);
        result.removed_per_layer[l] = static_cast<long>(doomed.size());
    }
    return result;
}

// ---------------------------------------------------------------------------
// redistribute
// ---------------------------------------------------------------------------

RedistResult redistribute(const std::vector<long>& removed_per_layer,
                          const std::vector<Mat>& weights, const MaskSet& masks,
                          const std::vector<Mat>* grads, RedistMode mode) {
    (void)grads;  // gradient-based rules are out of scope
    for (long r : removed_per_layer) {
        if (r < 0) throw InvalidArgumentError("redistribute: negative removed count");
    }
    const size_t L = removed_per_layer.size();
    const long total = std::accumulate(removed_per_layer.begin(), removed_per_layer.end(), 0L);

    RedistResult result;
    if (mode == RedistMode::none) {
        result.quotas = removed_per_layer;
        return result;
    }

    std::vector<double> proportion(L, 0.0);
    if (mode == RedistMode::magnitude) {
        for (size_t l = 0; l < L; ++l) {
            auto active = active_weights(weights[l], masks.layers[l], l);
            double sum = 0.0;
            for (const auto& a : active) sum += a.magnitude;
            proportion[l] = active.empty() ? 0.0 : sum / static_cast<double>(active.size());
        }
    } else {  // nonzeros
        for (size_t l = 0; l < L; ++l) proportion[l] = static_cast<double>(masks.nonzeros(l));
    }

    double mass = std::accumulate(proportion.begin(), proportion.end(), 0.0);
    if (mass <= 0.0) {
        result.quotas = removed_per_layer;
        result.fell_back_to_none = true;
        return result;
    }

    // largest-remainder rounding keeps the total exactly conserved
    result.quotas.assign(L, 0);
    std::vector<std::pair<double, size_t>> remainders;
    long assigned = 0;
    for (size_t l = 0; l < L; ++l) {
        double exact = static_cast<double>(total) * proportion[l] / mass;
        result.quotas[l] = static_cast<long>(std::floor(exact));
        assigned += result.quotas[l];
        remainders.push_back({exact - std::floor(exact), l});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
              });
    for (long i = 0; i < total - assigned; ++i) {
        ++result.quotas[remainders[static_cast<size_t>(i)].second];
    }
    return result;
}

// ---------------------------------------------------------------------------
// grow
// ---------------------------------------------------------------------------

MaskSet grow(const MaskSet& masks, const std::vector<long>& quotas, uint64_t seed) {
    const size_t L = masks.layers.size();
    if (quotas.size() != L) throw DimensionError("grow: quota count mismatch");

    std::vector<long> capacity(L);
    long total_capacity = 0, total_quota = 0;
    for (size_t l = 0; l < L; ++l) {
        capacity[l] = static_cast<long>(masks.layers[l].size()) - masks.nonzeros(l);
        total_capacity += capacity[l];
    }
    for (long q : quotas) {
        if (q < 0) throw InvalidArgumentError("grow: negative quota");
        total_quota += q;
    }
    if (total_quota > total_capacity) {
        throw CapacityError("grow: total quota " + std::to_string(total_quota) +
                            " exceeds inactive capacity " + std::to_string(total_capacity));
    }

    // clamp to capacity; spill overflow into the layers with the most room
    std::vector<long> assign(L);
    long overflow = 0;
    for (size_t l = 0; l < L; ++l) {
        assign[l] = std::min(quotas[l], capacity[l]);
        overflow += quotas[l] - assign[l];
    }
    while (overflow > 0) {
        size_t best = L;
        long best_room = 0;
        for (size_t l = 0; l < L; ++l) {
            long room = capacity[l] - assign[l];
            if (room > best_room) {
                best_room = room;
                best = l;
            }
        }
        ++assign[best];
        --overflow;
    }

    MaskSet out = masks;
    for (size_t l = 0; l < L; ++l) {
        if (assign[l] == 0) continue;
        Mat& m = out.layers[l];
        const Index cols = m.cols();
        std::vector<long> inactive;
        inactive.reserve(static_cast<size_t>(capacity[l]));
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < cols; ++c)
                if (m(r, c) == 0.0) inactive.push_back(r * cols + c);
        Rng rng(derive_seed(seed, "grow", static_cast<uint64_t>(l)));
        auto picks = rng.sample_without_replacement(static_cast<long>(inactive.size()), assign[l]);
        for (long p : picks) {
            long flat = inactive[static_cast<size_t>(p)];
            m(flat / cols, flat % cols) = 1.0;
        }
    }
    return out;
}

double cosine_decay(double initial_rate, long epoch, long total_epochs) {
    if (total_epochs <= 0) throw InvalidArgumentError("cosine_decay: total_epochs must be > 0");
    if (epoch < 0 || epoch > total_epochs) {
        throw InvalidArgumentError("cosine_decay: epoch outside [0, total]");
    }
    return initial_rate / 2.0 *
           (1.0 + std::cos(M_PI * static_cast<double>(epoch) / static_cast<double>(total_epochs)));
}

}  // namespace lsh

#pragma once

#include "lsh/corpus.hpp"
#include "lsh/model.hpp"
#include "lsh/types.hpp"

#include <functional>
#include <string>

namespace lsh {

// Sorted (descending) exponents for one model at one point in training.
struct LyapunovSpectrum {
    Vec exponents;
    Index samples = 0;      // K
    Index steps = 0;        // T
    Index warmup = 0;       // leading steps excluded from accumulation
    long clamp_events = 0;  // diagonal entries clamped before the log

    Index dim() const { return exponents.size(); }
};

// Whether LSTM cell states count toward the spectrum dimension. `full`
// tracks the whole (h, c) state; `h_only` restricts the Jacobian to the
// h-block along the same trajectory, for comparison.
enum class StateScope { full, h_only };

// One step of a pluggable dynamical system: advance the state and report
// the Jacobian whose stretching the spectrum measures. The Jacobian may be
// a restriction of the true state Jacobian (see StateScope).
struct JacobianStep {
    Vec state;
    Mat jacobian;
};

using StepSystem = std::function<JacobianStep(const Vec& state, Index sample, Index t)>;

// QR-method spectrum estimation: per sample, start from the zero state and
// an identity base, update (B, R) = qr(J * B) each step, and accumulate
// log(diag R) after the warmup. Exponents are the accumulated sums over
// (T - warmup) * K, sorted descending. Diagonal entries below `clamp` are
// clamped (and counted) so logs stay finite.
LyapunovSpectrum compute_ls_generic(const StepSystem& system, Index dynamics_dim,
                                    Index spectrum_dim, Index samples, Index steps,
                                    Index warmup, double clamp = 1e-30);

// Model binding: inputs are the fixed LS batch's token windows mapped
// through the model's embedding. Masked weights are materialized once via
// apply_masks, so a pre-masked dense model follows the identical
// arithmetic path.
LyapunovSpectrum compute_ls(const SparseModel& model, const LsBatch& batch, Index warmup,
                            StateScope scope = StateScope::full);

struct SpectrumStats {
    double max = 0, min = 0, mean = 0, variance = 0;  // population variance
};

SpectrumStats spectrum_stats(const LyapunovSpectrum& ls);

// one row per exponent, columns (index, lambda)
void save_spectrum_csv(const LyapunovSpectrum& ls, const std::string& path);
LyapunovSpectrum load_spectrum_csv(const std::string& path);

}  // namespace lsh

#pragma once

#include "lsh/corpus.hpp"
#include "lsh/model.hpp"
#include "lsh/rng.hpp"
#include "lsh/types.hpp"

#include <vector>

namespace lsh {

// SGD with gradient clipping and a simplified NT-ASGD switch: once the
// validation loss stops improving over the non-monotone window, iterate
// averaging turns on (and stays on). Evaluation then uses the averages.
struct OptimizerState {
    double lr = 2.0;
    double clip = 0.25;
    long nonmono = 5;

    bool averaging_active = false;
    long averaged_steps = 0;
    std::vector<Mat> avg_mats;  // aligned with collect_params order
    std::vector<Vec> avg_vecs;

    std::vector<double> val_loss_history;
    Rng dropout_rng{0};

    explicit OptimizerState(uint64_t dropout_seed = 0) : dropout_rng(dropout_seed) {}

    // records the loss; flips averaging on when the trigger fires
    void observe_val_loss(double loss);
};

// true iff the latest loss is >= the minimum of the history excluding the
// last `nonmono` entries (and the history is long enough to have one)
bool ntasgd_trigger(const std::vector<double>& history, long nonmono);

// One pass of truncated BPTT over all blocks: per block, forward + backward,
// clip the global gradient norm, SGD step, re-apply masks. Hidden state
// carries across blocks and resets at the epoch boundary. Returns the mean
// per-token training loss.
double train_epoch(SparseModel& model, const BatchSet& batches, OptimizerState& opt);

// exp(mean per-token cross-entropy); no updates, no dropout. Uses averaged
// parameters when averaging is active.
double evaluate_perplexity(const SparseModel& model, const BatchSet& batches,
                           const OptimizerState* opt = nullptr);

double evaluate_loss(const SparseModel& model, const BatchSet& batches,
                     const OptimizerState* opt = nullptr);

// Copy of the model carrying the NT-ASGD averaged parameters (the model
// itself when averaging has not started). Masked positions are re-zeroed.
SparseModel with_averaged_params(const SparseModel& model, const OptimizerState& opt);

// death -> redistribute -> grow with the candidate's modes at the decayed
// rate; keeps the global nonzero count invariant. Weights at freshly grown
// positions are zero because masked positions are held at exactly zero.
void prune_regrow_cycle(SparseModel& model, double decayed_rate, uint64_t cycle_seed);

}  // namespace lsh

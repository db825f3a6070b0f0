#pragma once

#include "lsh/config.hpp"
#include "lsh/ls_space.hpp"
#include "lsh/lyapunov.hpp"
#include "lsh/model.hpp"
#include "lsh/rng.hpp"
#include "lsh/training.hpp"

#include <string>
#include <vector>

namespace lsh {

// ---------------------------------------------------------------------------
// Samplers over the hyperpruning space: 2 init x 4 death x 3 redistribution
// modes plus the continuous death rate.
// ---------------------------------------------------------------------------

struct SamplerSpace {
    double death_rate_min = 0.4;
    double death_rate_max = 0.9;

    static constexpr long categorical_grid = 2 * 4 * 3;
};

struct ArchiveEntry {
    CandidateConfig config;
    double criterion = 0.0;  // distance or validation loss when measured
    double val_loss = 0.0;
    long epoch = 0;
};

// TPE constants; the paper leaves sampler internals open, so these live in
// config-adjacent code rather than magic numbers at call sites.
struct TpeSettings {
    double gamma = 0.25;       // good/bad split quantile
    long min_archive = 5;      // below this, fall back to uniform
    long proposals = 24;       // draws scored per proposal
    double bandwidth_floor = 1e-3;
    double laplace = 1.0;      // categorical smoothing
};

CandidateConfig random_propose(const SamplerSpace& space, Rng& rng);

// Good/bad split at the gamma quantile; continuous axis modeled by Gaussian
// kernels (Scott-style bandwidth with a floor), categorical axes by
// Laplace-smoothed frequencies. Returns the draw maximizing the
// good/bad density ratio.
CandidateConfig tpe_propose(const std::vector<ArchiveEntry>& archive, const SamplerSpace& space,
                            Rng& rng, const TpeSettings& settings = {});

// Full Cartesian product over the categorical axes at a fixed death rate,
// deterministic order.
std::vector<CandidateConfig> grid_candidates(const SamplerSpace& space, double fixed_death_rate);

// ---------------------------------------------------------------------------
// Pool arithmetic: at each event the pool keeps the closest
// min(n, max(final_k, floor(n/2))) candidates and, while the survivor count
// still exceeds final_k, adds floor(n/4) fresh ones (n = pre-removal size).
// ---------------------------------------------------------------------------

long keep_count(long n, long final_k);
long generation_count(long n_before_removal, long n_after_removal, long final_k);

struct PoolEvent {
    long before = 0;
    long kept = 0;
    long generated = 0;
    long after = 0;
};

// Simulated trajectory until the pool reaches final_k or max_events pass.
std::vector<PoolEvent> simulate_pool(long initial, long max_events, long final_k);

// ---------------------------------------------------------------------------
// Search state
// ---------------------------------------------------------------------------

struct LiveCandidate {
    CandidateConfig config;
    SparseModel model;
    OptimizerState opt;
    long epochs_trained = 0;
    double latest_distance = std::numeric_limits<double>::quiet_NaN();
    double latest_val_loss = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;  // diverged; removed at the next event, never re-enters
    std::string metrics_path;
};

struct SearchState {
    std::vector<LiveCandidate> pool;
    std::vector<ArchiveEntry> archive;  // append-only
    LyapunovSpectrum reference;
    long round = 0;
    long next_ordinal = 0;
    Criterion criterion = Criterion::ls_distance;
    long final_k = 3;
};

// ids ascending by the criterion (failed candidates rank last); ties break
// by candidate id. Throws IncompleteStateError when a live candidate lacks
// a measurement.
std::vector<std::string> rank_candidates(const SearchState& state, Criterion criterion);

// Keeps the min(n, max(final_k, floor(n/2))) closest candidates (failed
// ones are always retired); returns the removed ids. Archive rows persist.
std::vector<std::string> remove_step(SearchState& state);

// Adds `count` fresh candidates from the proposal source; `materialize`
// builds the live entry (model, optimizer, id) for a proposed config.
void generate_step(SearchState& state, long count,
                   const std::function<CandidateConfig()>& propose,
                   const std::function<LiveCandidate(CandidateConfig)>& materialize);

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

struct SearchReport {
    CandidateConfig best;
    double best_val_ppl = 0.0;
    double best_test_ppl = 0.0;
    long selection_epochs = 0;   // sum over events of pool size x E
    long extensive_epochs = 0;
    long events = 0;
    std::vector<long> pool_trajectory;  // pool size after each event
    long clamp_events_total = 0;
    std::string best_checkpoint;
};

// Runs the complete loop: reference spectrum, pool initialization, train->
// measure->remove->generate rounds, extensive training of survivors, and
// the run-directory artifact set (run.json, pool_history.csv, spectra/,
// embedding_<round>.csv, metrics/, report.json).
SearchReport lsh_run(const RunConfig& config);

// Plot-ready summaries derived from a finished run directory:
// trajectories.csv (candidate_id, epoch, distance) and budget_summary.csv.
// Throws IncompleteArtifactError listing anything missing.
void emit_report_summaries(const std::string& run_dir);

// Trains the dense reference to early-stop convergence and writes its
// checkpoint; returns the final validation perplexity.
double train_dense_reference(const RunConfig& config, const std::string& checkpoint_path,
                             const std::string& metrics_path);

}  // namespace lsh

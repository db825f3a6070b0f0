#include "lsh/search.hpp"

#include "lsh/csv.hpp"
#include "lsh/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

namespace lsh {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

namespace {

const InitMode kInitModes[] = {InitMode::uniform, InitMode::er};
const DeathMode kDeathModes[] = {DeathMode::magnitude, DeathMode::global_magnitude,
                                 DeathMode::set, DeathMode::threshold};
const RedistMode kRedistModes[] = {RedistMode::none, RedistMode::magnitude,
                                   RedistMode::nonzeros};

double gaussian(double x, double mean, double bw) {
    const double z = (x - mean) / bw;
    return std::exp(-0.5 * z * z) / (bw * std::sqrt(2.0 * M_PI));
}

struct CategoricalModel {
    std::vector<double> probs;  // Laplace-smoothed

    template <class Enum, size_t N>
    static CategoricalModel fit(const Enum (&)[N],
                                const std::vector<const CandidateConfig*>& set,
                                Enum CandidateConfig::*field, double laplace) {
        CategoricalModel model;
        model.probs.assign(N, laplace);
        for (const CandidateConfig* c : set) {
            model.probs[static_cast<size_t>(c->*field)] += 1.0;
        }
        const double total = static_cast<double>(set.size()) + laplace * static_cast<double>(N);
        for (double& p : model.probs) p /= total;
        return model;
    }

    size_t sample(Rng& rng) const {
        double u = rng.uniform();
        double acc = 0.0;
        for (size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    }
};

struct KdeModel {
    std::vector<double> centers;
    double bandwidth = 1e-3;

    static KdeModel fit(const std::vector<const CandidateConfig*>& set, double floor_bw) {
        KdeModel model;
        for (const CandidateConfig* c : set) model.centers.push_back(c->death_rate);
        double mean = 0.0;
        for (double v : model.centers) mean += v;
        mean /= static_cast<double>(model.centers.size());
        double var = 0.0;
        for (double v : model.centers) var += (v - mean) * (v - mean);
        var /= static_cast<double>(model.centers.size());
        const double n = static_cast<double>(model.centers.size());
        // Scott-style n^(-1/5) scaling with a hard floor
        model.bandwidth = std::max(std::sqrt(var) * std::pow(n, -0.2), floor_bw);
        return model;
    }

    double density(double x) const {
        double sum = 0.0;
        for (double c : centers) sum += gaussian(x, c, bandwidth);
        return sum / static_cast<double>(centers.size());
    }

    double sample(Rng& rng, double lo, double hi) const {
        const size_t pick = static_cast<size_t>(rng.below(centers.size()));
        return std::clamp(centers[pick] + rng.normal(0.0, bandwidth), lo, hi);
    }
};

}  // namespace

CandidateConfig random_propose(const SamplerSpace& space, Rng& rng) {
    CandidateConfig c;
    c.init_mode = kInitModes[rng.below(2)];
    c.death_mode = kDeathModes[rng.below(4)];
    c.redist_mode = kRedistModes[rng.below(3)];
    c.death_rate = rng.uniform(space.death_rate_min, space.death_rate_max);
    return c;
}

CandidateConfig tpe_propose(const std::vector<ArchiveEntry>& archive, const SamplerSpace& space,
                            Rng& rng, const TpeSettings& settings) {
    if (static_cast<long>(archive.size()) < settings.min_archive) {
        return random_propose(space, rng);
    }

    std::vector<const ArchiveEntry*> sorted;
    for (const auto& e : archive) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(), [](const ArchiveEntry* a, const ArchiveEntry* b) {
        return a->criterion < b->criterion;
    });
    const size_t n_good = std::max<size_t>(
        1, static_cast<size_t>(std::floor(settings.gamma * static_cast<double>(sorted.size()))));
    if (n_good >= sorted.size()) return random_propose(space, rng);

    std::vector<const CandidateConfig*> good, bad;
    for (size_t i = 0; i < sorted.size(); ++i) {
        (i < n_good ? good : bad).push_back(&sorted[i]->config);
    }

    auto good_init = CategoricalModel::fit(kInitModes, good, &CandidateConfig::init_mode,
                                           settings.laplace);
    auto bad_init = CategoricalModel::fit(kInitModes, bad, &CandidateConfig::init_mode,
                                          settings.laplace);
    auto good_death = CategoricalModel::fit(kDeathModes, good, &CandidateConfig::death_mode,
                                            settings.laplace);
    auto bad_death = CategoricalModel::fit(kDeathModes, bad, &CandidateConfig::death_mode,
                                           settings.laplace);
    auto good_redist = CategoricalModel::fit(kRedistModes, good, &CandidateConfig::redist_mode,
                                             settings.laplace);
    auto bad_redist = CategoricalModel::fit(kRedistModes, bad, &CandidateConfig::redist_mode,
                                            settings.laplace);
    auto good_rate = KdeModel::fit(good, settings.bandwidth_floor);
    auto bad_rate = KdeModel::fit(bad, settings.bandwidth_floor);

    CandidateConfig best;
    double best_score = -1.0;
    for (long p = 0; p < settings.proposals; ++p) {
        CandidateConfig c;
        const size_t i_init = good_init.sample(rng);
        const size_t i_death = good_death.sample(rng);
        const size_t i_redist = good_redist.sample(rng);
        c.init_mode = kInitModes[i_init];
        c.death_mode = kDeathModes[i_death];
        c.redist_mode = kRedistModes[i_redist];
        c.death_rate = good_rate.sample(rng, space.death_rate_min, space.death_rate_max);

        double score = good_init.probs[i_init] / bad_init.probs[i_init];
        score *= good_death.probs[i_death] / bad_death.probs[i_death];
        score *= good_redist.probs[i_redist] / bad_redist.probs[i_redist];
        score *= good_rate.density(c.death_rate) /
                 std::max(bad_rate.density(c.death_rate), 1e-300);
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

std::vector<CandidateConfig> grid_candidates(const SamplerSpace& space, double fixed_death_rate) {
    if (!(fixed_death_rate >= space.death_rate_min && fixed_death_rate <= space.death_rate_max)) {
        throw InvalidArgumentError("grid_candidates: fixed death rate outside bounds");
    }
    std::vector<CandidateConfig> out;
    for (InitMode init : kInitModes) {
        for (DeathMode death : kDeathModes) {
            for (RedistMode redist : kRedistModes) {
                CandidateConfig c;
                c.init_mode = init;
                c.death_mode = death;
                c.redist_mode = redist;
                c.death_rate = fixed_death_rate;
                out.push_back(c);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pool arithmetic
// ---------------------------------------------------------------------------

long keep_count(long n, long final_k) {
    return std::min(n, std::max(final_k, n / 2));
}

long generation_count(long n_before_removal, long n_after_removal, long final_k) {
    if (n_after_removal <= final_k) return 0;
    return n_before_removal / 4;
}

std::vector<PoolEvent> simulate_pool(long initial, long max_events, long final_k) {
    std::vector<PoolEvent> events;
    long n = initial;
    for (long e = 0; e < max_events && n > final_k; ++e) {
        PoolEvent ev;
        ev.before = n;
        ev.kept = keep_count(n, final_k);
        ev.generated = generation_count(n, ev.kept, final_k);
        ev.after = ev.kept + ev.generated;
        events.push_back(ev);
        n = ev.after;
    }
    return events;
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

std::vector<std::string> rank_candidates(const SearchState& state, Criterion criterion) {
    struct Entry {
        double value;
        std::string id;
    };
    std::vector<Entry> entries;
    for (const auto& cand : state.pool) {
        double value;
        if (cand.failed) {
            value = std::numeric_limits<double>::infinity();
        } else {
            value = (criterion == Criterion::ls_distance) ? cand.latest_distance
                                                          : cand.latest_val_loss;
            if (std::isnan(value)) {
                throw IncompleteStateError(
                    "candidate " + cand.config.id + " has no measurement for criterion " +
                        to_string(criterion),
                    cand.config.id);
            }
        }
        entries.push_back({value, cand.config.id});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.id < b.id;
    });
    std::vector<std::string> ids;
    for (const auto& e : entries) ids.push_back(e.id);
    return ids;
}

std::vector<std::string> remove_step(SearchState& state) {
    auto ranking = rank_candidates(state, state.criterion);
    const long kept = keep_count(static_cast<long>(state.pool.size()), state.final_k);
    std::map<std::string, long> rank_of;
    for (size_t i = 0; i < ranking.size(); ++i) rank_of[ranking[i]] = static_cast<long>(i);

    std::vector<std::string> removed;
    std::vector<LiveCandidate> survivors;
    for (auto& cand : state.pool) {
        if (rank_of[cand.config.id] < kept && !cand.failed) {
            survivors.push_back(std::move(cand));
        } else {
            removed.push_back(cand.config.id);
        }
    }
    state.pool = std::move(survivors);
    return removed;
}

void generate_step(SearchState& state, long count,
                   const std::function<CandidateConfig()>& propose,
                   const std::function<LiveCandidate(CandidateConfig)>& materialize) {
    if (static_cast<long>(state.pool.size()) <= state.final_k) return;
    for (long g = 0; g < count; ++g) {
        state.pool.push_back(materialize(propose()));
    }
}

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

namespace {

struct LockFile {
    std::string path;
    explicit LockFile(const std::string& dir) : path(dir + "/.lock") {
        if (fs::exists(path)) {
            throw IoError("run directory is locked by another process: " + path);
        }
        std::ofstream out(path);
        out << "lock\n";
    }
    ~LockFile() { std::error_code ec; fs::remove(path, ec); }
};

std::string candidate_id(long ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%04ld", ordinal);
    return buf;
}

struct RunContext {
    const RunConfig* config = nullptr;
    ModelProfile profile;
    BatchSet train_batches, val_batches, test_batches;
    LsBatch ls_batch;
    std::string out_dir;
};

// one row per (candidate, epoch) measurement
struct SpectrumRecord {
    std::string id;
    long epoch = 0;
    LyapunovSpectrum spectrum;
};

struct MetricsLog {
    std::vector<std::vector<std::string>> rows;

    void add(long epoch, double train_loss, double val_loss, double val_ppl) {
        rows.push_back({std::to_string(epoch), format_double(train_loss),
                        format_double(val_loss), format_double(val_ppl)});
    }

    void save(const std::string& path) const {
        CsvWriter writer({"epoch", "train_loss", "val_loss", "val_ppl"});
        for (const auto& r : rows) {
            auto copy = r;
            writer.add_row(std::move(copy));
        }
        writer.save(path);
    }
};

LiveCandidate make_candidate(const RunContext& ctx, CandidateConfig config, long ordinal) {
    config.id = candidate_id(ordinal);
    config.seed = derive_seed(ctx.config->seed, "candidate", static_cast<uint64_t>(ordinal));
    LiveCandidate cand;
    cand.config = config;
    cand.model = init_model(ctx.profile, config, ctx.config->sparsity);
    cand.opt = OptimizerState(derive_seed(config.seed, "dropout"));
    cand.opt.lr = ctx.config->lr;
    cand.opt.clip = ctx.config->clip;
    cand.opt.nonmono = ctx.config->nonmono;
    cand.metrics_path = ctx.out_dir + "/metrics/" + config.id + ".csv";
    return cand;
}

// Trains one candidate for `epochs` epochs (metrics, NT-ASGD bookkeeping and
// the per-epoch prune-regrow cycle included). Safe to run concurrently for
// distinct candidates.
void train_candidate_epochs(const RunContext& ctx, LiveCandidate& cand, long epochs,
                            MetricsLog& log) {
    const long horizon = ctx.config->resolved_decay_horizon();
    for (long e = 0; e < epochs && !cand.failed; ++e) {
        try {
            double train_loss = train_epoch(cand.model, ctx.train_batches, cand.opt);
            double val_loss = evaluate_loss(cand.model, ctx.val_batches, &cand.opt);
            cand.opt.observe_val_loss(val_loss);
            ++cand.epochs_trained;
            cand.latest_val_loss = val_loss;
            log.add(cand.epochs_trained, train_loss, val_loss, std::exp(val_loss));
            const double rate = cosine_decay(cand.config.death_rate,
                                             std::min(cand.epochs_trained, horizon), horizon);
            prune_regrow_cycle(cand.model, rate,
                               derive_seed(cand.config.seed, "regrow",
                                           static_cast<uint64_t>(cand.epochs_trained)));
        } catch (const DivergedError&) {
            cand.failed = true;
        }
    }
}

// wave-parallel map over the pool; each worker touches only its candidate
void parallel_over_pool(std::vector<LiveCandidate>& pool, long workers,
                        const std::function<void(LiveCandidate&)>& task) {
    if (workers <= 1) {
        for (auto& cand : pool) task(cand);
        return;
    }
    for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(workers)) {
        std::vector<std::thread> threads;
        const size_t end = std::min(pool.size(), start + static_cast<size_t>(workers));
        for (size_t i = start; i < end; ++i) {
            threads.emplace_back([&pool, i, &task] { task(pool[i]); });
        }
        for (auto& t : threads) t.join();
    }
}

ordered_json config_json(const CandidateConfig& c) {
    return ordered_json{{"id", c.id},
                        {"init_mode", to_string(c.init_mode)},
                        {"death_mode", to_string(c.death_mode)},
                        {"redist_mode", to_string(c.redist_mode)},
                        {"death_rate", c.death_rate},
                        {"seed", c.seed}};
}

std::string maybe_number(double v) {
    return std::isfinite(v) ? format_double(v) : std::string();
}

}  // namespace

double train_dense_reference(const RunConfig& config, const std::string& checkpoint_path,
                             const std::string& metrics_path) {
    auto corpus = load_corpus(config.corpus_path, config.tokenization);
    auto splits = split_corpus(corpus, config.train_frac, config.val_frac);
    auto train = make_batches(splits.train, config.batch_size, config.bptt);
    auto val = make_batches(splits.val, config.batch_size, config.bptt);

    auto model = init_dense_model(config.model_profile(corpus.vocab_size()),
                                  config.reference_seed);
    OptimizerState opt(derive_seed(config.reference_seed, "dropout"));
    opt.lr = config.lr;
    opt.clip = config.clip;
    opt.nonmono = config.nonmono;

    MetricsLog log;
    double best_val = std::numeric_limits<double>::infinity();
    long since_best = 0;
    for (long epoch = 1; epoch <= config.reference_max_epochs; ++epoch) {
        double train_loss = train_epoch(model, train, opt);
        double val_loss = evaluate_loss(model, val, &opt);
        opt.observe_val_loss(val_loss);
        log.add(epoch, train_loss, val_loss, std::exp(val_loss));
        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            since_best = 0;
        } else if (++since_best >= config.nonmono) {
            break;
        }
    }
    SparseModel final_model = with_averaged_params(model, opt);
    save_checkpoint(final_model, checkpoint_path);
    if (!metrics_path.empty()) log.save(metrics_path);
    return evaluate_perplexity(model, val, &opt);
}

SearchReport lsh_run(const RunConfig& config) {
    validate(config);

    RunContext ctx;
    ctx.config = &config;
    ctx.out_dir = config.out_dir;
    fs::create_directories(ctx.out_dir);
    fs::create_directories(ctx.out_dir + "/spectra");
    fs::create_directories(ctx.out_dir + "/metrics");
    LockFile lock(ctx.out_dir);

    {
        std::ofstream out(ctx.out_dir + "/run.json");
        out << to_json_text(config);
    }

    auto corpus = load_corpus(config.corpus_path, config.tokenization);
    auto splits = split_corpus(corpus, config.train_frac, config.val_frac);
    ctx.profile = config.model_profile(corpus.vocab_size());
    ctx.train_batches = make_batches(splits.train, config.batch_size, config.bptt);
    ctx.val_batches = make_batches(splits.val, config.batch_size, config.bptt);
    ctx.test_batches = make_batches(splits.test, config.batch_size, config.bptt);
    if (static_cast<long>(splits.val.size()) < config.ls_samples * config.ls_steps) {
        throw ConfigError("ls.samples x ls.steps exceeds the validation split (" +
                          std::to_string(splits.val.size()) + " tokens)");
    }
    ctx.ls_batch = make_ls_batch(splits.val, config.ls_samples, config.ls_steps, 0);

    // dense reference: load the cached checkpoint or train it now
    std::string ref_path = config.reference_checkpoint.empty()
                               ? ctx.out_dir + "/dense.ckpt"
                               : config.reference_checkpoint;
    if (!fs::exists(ref_path)) {
        if (!config.train_reference) {
            throw ConfigError("reference.checkpoint not found: " + ref_path);
        }
        train_dense_reference(config, ref_path, ctx.out_dir + "/metrics/dense.csv");
    }
    SparseModel reference_model = load_checkpoint(ref_path);
    if (reference_model.profile.vocab != ctx.profile.vocab ||
        reference_model.profile.hidden != ctx.profile.hidden ||
        reference_model.profile.arch != ctx.profile.arch) {
        throw ConfigError("reference checkpoint does not match the configured profile");
    }

    SearchState state;
    state.criterion = config.criterion;
    state.final_k = config.final_k;

    SearchReport report;
    const bool use_ls = (config.criterion == Criterion::ls_distance);

    std::vector<SpectrumRecord> all_spectra;
    if (use_ls) {
        state.reference = compute_ls(reference_model, ctx.ls_batch, config.ls_warmup);
        report.clamp_events_total += state.reference.clamp_events;
        save_spectrum_csv(state.reference, ctx.out_dir + "/spectra/reference.csv");
    }

    // initial pool
    SamplerSpace space;
    space.death_rate_min = config.death_rate_min;
    space.death_rate_max = config.death_rate_max;
    Rng sampler_rng(derive_seed(config.seed, "sampler"));
    std::map<std::string, MetricsLog> metrics;

    if (config.sampler == SamplerKind::grid) {
        // fixed-rate grid enumeration: removal only, no generation
        for (const auto& c : grid_candidates(space, config.grid_death_rate)) {
            state.pool.push_back(make_candidate(ctx, c, state.next_ordinal++));
        }
    } else {
        const long n0 = config.resolved_pool();
        for (long i = 0; i < n0; ++i) {
            CandidateConfig c = (config.sampler == SamplerKind::tpe)
                                    ? tpe_propose(state.archive, space, sampler_rng)
                                    : random_propose(space, sampler_rng);
            state.pool.push_back(make_candidate(ctx, c, state.next_ordinal++));
        }
    }

    CsvWriter pool_history(
        {"event", "candidate_id", "action", "distance", "val_loss"});

    const long events_budget = config.selection_epochs / config.epochs_per_event;
    const long workers = config.resolved_workers();

    for (long event = 1; event <= events_budget; ++event) {
        if (static_cast<long>(state.pool.size()) <= config.final_k) break;
        state.round = event;
        report.selection_epochs +=
            static_cast<long>(state.pool.size()) * config.epochs_per_event;

        // train every live candidate E epochs, then measure its spectrum
        for (const auto& cand : state.pool) metrics[cand.config.id];  // materialize
        parallel_over_pool(state.pool, workers, [&](LiveCandidate& cand) {
            train_candidate_epochs(ctx, cand, config.epochs_per_event,
                                   metrics.find(cand.config.id)->second);
        });
        for (auto& cand : state.pool) metrics[cand.config.id].save(cand.metrics_path);

        if (use_ls) {
            std::vector<LyapunovSpectrum> fresh(state.pool.size());
            parallel_over_pool(state.pool, workers, [&](LiveCandidate& cand) {
                if (cand.failed) return;
                size_t idx = static_cast<size_t>(&cand - state.pool.data());
                fresh[idx] = compute_ls(cand.model, ctx.ls_batch, config.ls_warmup);
            });
            for (size_t i = 0; i < state.pool.size(); ++i) {
                auto& cand = state.pool[i];
                if (cand.failed) continue;
                report.clamp_events_total += fresh[i].clamp_events;
                all_spectra.push_back({cand.config.id, cand.epochs_trained, fresh[i]});
                save_spectrum_csv(fresh[i], ctx.out_dir + "/spectra/" + cand.config.id + "_" +
                                                std::to_string(cand.epochs_trained) + ".csv");
            }

            // embedding refit on everything collected so far, then distances
            std::vector<LyapunovSpectrum> history;
            for (const auto& rec : all_spectra) history.push_back(rec.spectrum);
            auto embedding = fit_embedding(state.reference, history, config.embed_method);

            for (auto& cand : state.pool) {
                if (cand.failed) {
                    cand.latest_distance = std::numeric_limits<double>::infinity();
                    continue;
                }
                const SpectrumRecord* latest = nullptr;
                for (const auto& rec : all_spectra) {
                    if (rec.id == cand.config.id) latest = &rec;
                }
                cand.latest_distance =
                    ls_distance(embedding, state.reference, latest->spectrum, config.metric);
            }

            // embedding coordinates for every collected spectrum this round
            CsvWriter embed_csv({"candidate_id", "epoch", "x", "y", "distance_to_reference"});
            Vec ref_point = embed(embedding, state.reference);
            auto point_row = [&](const std::string& id, long epoch, const Vec& p) {
                double d = point_distance(ref_point, p, config.metric);
                embed_csv.add_row({id, std::to_string(epoch), format_double(p(0)),
                                   format_double(p.size() > 1 ? p(1) : 0.0),
                                   format_double(d)});
            };
            point_row("reference", 0, ref_point);
            for (const auto& rec : all_spectra) {
                point_row(rec.id, rec.epoch, embed(embedding, rec.spectrum));
            }
            embed_csv.save(ctx.out_dir + "/embedding_" + std::to_string(event) + ".csv");
        }

        // archive rows for this event
        for (const auto& cand : state.pool) {
            ArchiveEntry entry;
            entry.config = cand.config;
            entry.criterion = cand.failed
                                  ? std::numeric_limits<double>::infinity()
                                  : (use_ls ? cand.latest_distance : cand.latest_val_loss);
            entry.val_loss = cand.latest_val_loss;
            entry.epoch = cand.epochs_trained;
            state.archive.push_back(entry);
        }

        // rank, remove, generate
        const long n_before = static_cast<long>(state.pool.size());
        std::map<std::string, std::pair<std::string, std::pair<double, double>>> measured;
        for (const auto& cand : state.pool) {
            measured[cand.config.id] = {cand.failed ? "failed" : "removed",
                                        {cand.latest_distance, cand.latest_val_loss}};
        }
        remove_step(state);
        for (const auto& cand : state.pool) measured[cand.config.id].first = "kept";
        for (const auto& [id, info] : measured) {
            pool_history.add_row({std::to_string(event), id, info.first,
                                  maybe_number(info.second.first),
                                  maybe_number(info.second.second)});
        }

        long to_generate =
            generation_count(n_before, static_cast<long>(state.pool.size()), config.final_k);
        if (config.sampler == SamplerKind::grid) to_generate = 0;
        const size_t pool_before_generation = state.pool.size();
        generate_step(
            state, to_generate,
            [&] {
                return (config.sampler == SamplerKind::tpe)
                           ? tpe_propose(state.archive, space, sampler_rng)
                           : random_propose(space, sampler_rng);
            },
            [&](CandidateConfig c) { return make_candidate(ctx, c, state.next_ordinal++); });
        for (size_t i = pool_before_generation; i < state.pool.size(); ++i) {
            pool_history.add_row({std::to_string(event), state.pool[i].config.id, "generated",
                                  "", ""});
        }

        ++report.events;
        report.pool_trajectory.push_back(static_cast<long>(state.pool.size()));
        pool_history.save(ctx.out_dir + "/pool_history.csv");
    }
    pool_history.save(ctx.out_dir + "/pool_history.csv");

    // extensive phase: train survivors to the per-candidate epoch cap with
    // early stop (patience = the non-monotone interval)
    std::map<std::string, long> epochs_at_selection_end;
    for (const auto& cand : state.pool) {
        metrics[cand.config.id];  // materialize
        epochs_at_selection_end[cand.config.id] = cand.epochs_trained;
    }
    parallel_over_pool(state.pool, workers, [&](LiveCandidate& cand) {
        MetricsLog& log = metrics.find(cand.config.id)->second;
        double best_val = std::numeric_limits<double>::infinity();
        long since_best = 0;
        for (const double v : cand.opt.val_loss_history) {
            if (v < best_val) best_val = v;
        }
        while (!cand.failed && cand.epochs_trained < config.extensive_epochs) {
            train_candidate_epochs(ctx, cand, 1, log);
            if (cand.failed) break;
            if (cand.latest_val_loss < best_val - 1e-12) {
                best_val = cand.latest_val_loss;
                since_best = 0;
            } else if (++since_best >= config.nonmono) {
                break;
            }
        }
    });
    for (auto& cand : state.pool) {
        report.extensive_epochs += cand.epochs_trained - epochs_at_selection_end[cand.config.id];
        metrics[cand.config.id].save(cand.metrics_path);
    }

    // pick the best survivor by final validation perplexity
    const LiveCandidate* best = nullptr;
    double best_ppl = std::numeric_limits<double>::infinity();
    std::map<std::string, double> final_ppl;
    for (auto& cand : state.pool) {
        if (cand.failed) continue;
        double ppl = evaluate_perplexity(cand.model, ctx.val_batches, &cand.opt);
        final_ppl[cand.config.id] = ppl;
        if (ppl < best_ppl || (ppl == best_ppl && best && cand.config.id < best->config.id)) {
            best_ppl = ppl;
            best = &cand;
        }
    }
    if (!best) throw Error("no surviving candidate finished extensive training");

    report.best = best->config;
    report.best_val_ppl = best_ppl;
    SparseModel deployable = with_averaged_params(best->model, best->opt);
    report.best_test_ppl = evaluate_perplexity(deployable, ctx.test_batches);
    report.best_checkpoint = ctx.out_dir + "/best.ckpt";
    save_checkpoint(deployable, report.best_checkpoint);

    ordered_json doc;
    doc["criterion"] = to_string(config.criterion);
    doc["sampler"] = to_string(config.sampler);
    doc["seed"] = config.seed;
    doc["best"] = config_json(report.best);
    doc["best_val_ppl"] = report.best_val_ppl;
    doc["best_test_ppl"] = report.best_test_ppl;
    doc["events"] = report.events;
    doc["pool_trajectory"] = report.pool_trajectory;
    doc["selection_epochs"] = report.selection_epochs;
    doc["extensive_epochs"] = report.extensive_epochs;
    doc["clamp_events_total"] = report.clamp_events_total;
    doc["survivor_val_ppl"] = final_ppl;
    doc["best_checkpoint"] = "best.ckpt";
    {
        std::ofstream out(ctx.out_dir + "/report.json");
        out << doc.dump(2) << "\n";
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report summaries
// ---------------------------------------------------------------------------

void emit_report_summaries(const std::string& run_dir) {
    std::vector<std::string> missing;
    for (const char* name : {"report.json", "pool_history.csv", "run.json"}) {
        if (!fs::exists(run_dir + "/" + name)) missing.push_back(name);
    }
    if (!missing.empty()) {
        std::string joined;
        for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
        throw IncompleteArtifactError("run directory incomplete, missing: " + joined);
    }

    // distance trajectories: latest embedding round wins for each
    // (candidate, epoch) measurement
    std::vector<std::string> embed_files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("embedding_", 0) == 0 && name.ends_with(".csv")) {
            embed_files.push_back(entry.path().string());
        }
    }
    std::sort(embed_files.begin(), embed_files.end(), [](const std::string& a, const std::string& b) {
        auto round = [](const std::string& p) {
            auto base = fs::path(p).stem().string();
            return std::stol(base.substr(base.find('_') + 1));
        };
        return round(a) < round(b);
    });

    std::map<std::pair<std::string, long>, double> latest;
    for (const auto& file : embed_files) {
        auto table = read_csv_strict(file);
        for (const auto& row : table.rows) {
            if (row[0] == "reference") continue;
            latest[{row[0], std::stol(row[1])}] = std::stod(row[4]);
        }
    }
    CsvWriter trajectories({"candidate_id", "epoch", "distance"});
    for (const auto& [key, dist] : latest) {
        trajectories.add_row({key.first, std::to_string(key.second), format_double(dist)});
    }
    trajectories.save(run_dir + "/trajectories.csv");

    // budget table from the report
    std::ifstream in(run_dir + "/report.json");
    ordered_json report = ordered_json::parse(in);
    CsvWriter budget({"events", "selection_epochs", "extensive_epochs", "best_val_ppl",
                      "best_candidate"});
    budget.add_row({report.at("events").dump(), report.at("selection_epochs").dump(),
                    report.at("extensive_epochs").dump(),
                    format_double(report.at("best_val_ppl").get<double>()),
                    report.at("best").at("id").get<std::string>()});
    budget.save(run_dir + "/budget_summary.csv");
}

}  // namespace lsh

// Command-line surface for dense-reference training, spectrum dumps,
// hyperpruning searches, and plot-data emission.

#include "lsh/config.hpp"
#include "lsh/csv.hpp"
#include "lsh/errors.hpp"
#include "lsh/lyapunov.hpp"
#include "lsh/search.hpp"
#include "lsh/training.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIncomplete = 3;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;  // overrides config.out_dir and LSH_OUT_ROOT
};

lsh::RunConfig resolve_config(const CommonOpts& opts) {
    lsh::RunConfig config = opts.config_path.empty()
                                ? lsh::RunConfig{}
                                : lsh::load_run_config(opts.config_path);
    for (const auto& assignment : opts.overrides) {
        lsh::apply_override(config, assignment);
    }
    if (!opts.out_dir.empty()) {
        config.out_dir = opts.out_dir;
    } else if (const char* root = std::getenv("LSH_OUT_ROOT");
               root && *root && !std::filesystem::path(config.out_dir).is_absolute()) {
        config.out_dir = std::string(root) + "/" + config.out_dir;
    }
    lsh::validate(config);
    return config;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
    auto* config_opt = cmd->add_option("-c,--config", opts.config_path,
                                       "JSON run configuration file");
    if (config_required) config_opt->required();
    cmd->add_option("--set", opts.overrides,
                    "override a config field, e.g. --set search.pool=24");
    cmd->add_option("-o,--out", opts.out_dir,
                    "output directory (overrides config and LSH_OUT_ROOT)");
}

int run_dense_train(const CommonOpts& opts) {
    auto config = resolve_config(opts);
    std::filesystem::create_directories(config.out_dir);
    std::filesystem::create_directories(config.out_dir + "/metrics");
    const std::string ckpt = config.reference_checkpoint.empty()
                                 ? config.out_dir + "/dense.ckpt"
                                 : config.reference_checkpoint;
    double ppl = lsh::train_dense_reference(config, ckpt,
                                            config.out_dir + "/metrics/dense.csv");
    std::cout << "dense reference: val_ppl=" << lsh::format_double(ppl) << " checkpoint="
              << ckpt << "\n";
    return kExitOk;
}

int run_ls(const CommonOpts& opts, const std::string& checkpoint, std::string out_csv) {
    auto config = resolve_config(opts);
    auto model = lsh::load_checkpoint(checkpoint);

    auto corpus = lsh::load_corpus(config.corpus_path, config.tokenization);
    if (corpus.vocab_size() != model.profile.vocab) {
        throw lsh::ConfigError("checkpoint vocab " + std::to_string(model.profile.vocab) +
                               " does not match corpus vocab " +
                               std::to_string(corpus.vocab_size()));
    }
    auto splits = lsh::split_corpus(corpus, config.train_frac, config.val_frac);
    if (static_cast<long>(splits.val.size()) < config.ls_samples * config.ls_steps) {
        throw lsh::ConfigError("ls.samples x ls.steps exceeds the validation split");
    }
    auto batch = lsh::make_ls_batch(splits.val, config.ls_samples, config.ls_steps, 0);
    auto spectrum = lsh::compute_ls(model, batch, config.ls_warmup);

    if (out_csv.empty()) out_csv = "spectrum.csv";
    lsh::save_spectrum_csv(spectrum, out_csv);
    auto stats = lsh::spectrum_stats(spectrum);
    std::cout << "spectrum: n=" << spectrum.dim() << " max=" << lsh::format_double(stats.max)
              << " min=" << lsh::format_double(stats.min)
              << " mean=" << lsh::format_double(stats.mean)
              << " variance=" << lsh::format_double(stats.variance)
              << " clamp_events=" << spectrum.clamp_events << " -> " << out_csv << "\n";
    return kExitOk;
}

int run_search(const CommonOpts& opts) {
    auto config = resolve_config(opts);
    auto report = lsh::lsh_run(config);
    std::cout << "best candidate: " << report.best.id
              << " init=" << lsh::to_string(report.best.init_mode)
              << " death=" << lsh::to_string(report.best.death_mode)
              << " redist=" << lsh::to_string(report.best.redist_mode)
              << " death_rate=" << lsh::format_double(report.best.death_rate)
              << " val_ppl=" << lsh::format_double(report.best_val_ppl)
              << " test_ppl=" << lsh::format_double(report.best_test_ppl) << "\n"
              << "run directory: " << config.out_dir << "\n";
    return kExitOk;
}

int run_report(const std::string& run_dir) {
    lsh::emit_report_summaries(run_dir);
    std::cout << "wrote " << run_dir << "/trajectories.csv and " << run_dir
              << "/budget_summary.csv\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lyapunov-spectrum hyperpruning for recurrent language models"};
    app.require_subcommand(1);

    CommonOpts dense_opts, ls_opts, search_opts;
    std::string checkpoint, ls_out, report_dir;

    auto* dense = app.add_subcommand("dense-train", "train the dense reference network");
    add_common(dense, dense_opts, true);

    auto* ls = app.add_subcommand("ls", "compute a Lyapunov spectrum from a checkpoint");
    add_common(ls, ls_opts, true);
    ls->add_option("--checkpoint", checkpoint, "model checkpoint path")->required();
    ls->add_option("--spectrum-out", ls_out, "output CSV path (default spectrum.csv)");

    auto* search = app.add_subcommand("search", "run the hyperpruning search");
    add_common(search, search_opts, true);
    search->add_option_function<std::string>(
        "--criterion",
        [&](const std::string& v) { search_opts.overrides.push_back("search.criterion=" + v); },
        "ls_distance or val_loss");
    search->add_option_function<std::string>(
        "--sampler",
        [&](const std::string& v) { search_opts.overrides.push_back("search.sampler=" + v); },
        "tpe, random or grid");
    search->add_option_function<std::string>(
        "--death-rate",
        [&](const std::string& v) {
            search_opts.overrides.push_back("search.grid_death_rate=" + v);
        },
        "fixed death rate for the grid sampler");
    search->add_option_function<std::string>(
        "--pool",
        [&](const std::string& v) { search_opts.overrides.push_back("search.pool=" + v); },
        "initial candidate pool size");
    search->add_option_function<std::string>(
        "--seed",
        [&](const std::string& v) { search_opts.overrides.push_back("seed=" + v); },
        "run seed");
    search->add_option_function<std::string>(
        "--workers",
        [&](const std::string& v) { search_opts.overrides.push_back("search.workers=" + v); },
        "concurrent candidate workers (0 = hardware)");

    auto* report = app.add_subcommand("report", "emit plot-ready summaries from a run");
    report->add_option("--run-dir", report_dir, "finished run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (dense->parsed()) return run_dense_train(dense_opts);
        if (ls->parsed()) return run_ls(ls_opts, checkpoint, ls_out);
        if (search->parsed()) return run_search(search_opts);
        if (report->parsed()) return run_report(report_dir);
    } catch (const lsh::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const lsh::InvalidArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const lsh::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const lsh::InvalidDataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const lsh::IncompleteArtifactError& e) {
        std::cerr << "incomplete artifacts: " << e.what() << "\n";
        return kExitIncomplete;
    } catch (const lsh::DivergedError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

#include "lsh/lyapunov.hpp"

#include "lsh/csv.hpp"
#include "lsh/errors.hpp"
#include "lsh/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace lsh {

LyapunovSpectrum compute_ls_generic(const StepSystem& system, Index dynamics_dim,
                                    Index spectrum_dim, Index samples, Index steps,
                                    Index warmup, double clamp) {
    if (samples < 1 || steps < 1) {
        throw InvalidArgumentError("compute_ls: K and T must be >= 1");
    }
    if (warmup < 0 || warmup >= steps) {
        throw InvalidArgumentError("compute_ls: warmup must be in [0, T)");
    }
    if (dynamics_dim < 1 || spectrum_dim < 1) {
        throw InvalidArgumentError("compute_ls: dimensions must be positive");
    }

    LyapunovSpectrum result;
    result.samples = samples;
    result.steps = steps;
    result.warmup = warmup;

    Vec mean_exponents = Vec::Zero(spectrum_dim);
    const double denom = static_cast<double>(steps - warmup);
    for (Index k = 0; k < samples; ++k) {
        Vec state = Vec::Zero(dynamics_dim);
        Mat base = Mat::Identity(spectrum_dim, spectrum_dim);
        Vec accum = Vec::Zero(spectrum_dim);
        for (Index t = 0; t < steps; ++t) {
            JacobianStep step = system(state, k, t);
            if (step.jacobian.rows() != spectrum_dim || step.jacobian.cols() != spectrum_dim) {
                throw DimensionError("compute_ls: jacobian dimension mismatch");
            }
            auto [q, r] = qr_decompose(step.jacobian * base);
            base = std::move(q);
            state = std::move(step.state);
            if (t >= warmup) {
                for (Index i = 0; i < spectrum_dim; ++i) {
                    double diag = r(i, i);
                    if (diag < clamp) {
                        diag = clamp;
                        ++result.clamp_events;
                    }
                    accum(i) += std::log(diag);
                }
            }
        }
        mean_exponents += accum / denom;
    }
    mean_exponents /= static_cast<double>(samples);
    std::sort(mean_exponents.begin(), mean_exponents.end(), std::greater<>());
    result.exponents = std::move(mean_exponents);
    return result;
}

LyapunovSpectrum compute_ls(const SparseModel& model, const LsBatch& batch, Index warmup,
                            StateScope scope) {
    if (batch.samples() < 1 || batch.steps() < 1) {
        throw InvalidArgumentError("compute_ls: empty batch");
    }
    for (Index k = 0; k < batch.samples(); ++k) {
        for (Index t = 0; t < batch.steps(); ++t) {
            if (batch.tokens(k, t) < 0 || batch.tokens(k, t) >= model.profile.vocab) {
                throw DimensionError("compute_ls: token id outside model vocab");
            }
        }
    }

    const Index hidden = model.profile.hidden;
    if (model.is_lstm()) {
        // materialize masked weights once; the spectrum path then matches a
        // pre-masked dense model bit for bit
        StackedLstmParams eff = apply_masks(model.lstm(), model.masks.layers);
        const Index layers = eff.num_layers();
        const Index full_dim = eff.state_dim();
        const bool restrict_h = (scope == StateScope::h_only);
        const Index spec_dim = restrict_h ? layers * hidden : full_dim;

        std::vector<Index> h_index;
        if (restrict_h) {
            for (Index l = 0; l < layers; ++l)
                for (Index i = 0; i < hidden; ++i) h_index.push_back(2 * l * hidden + i);
        }

        StepSystem system = [&, restrict_h](const Vec& state, Index k, Index t) {
            NetworkState s = NetworkState::unflatten(state, layers, hidden, true);
            Vec x = model.embedding.col(batch.tokens(k, t));
            Mat jac = lstm_jacobian(eff, nullptr, s, x);
            JacobianStep step;
            step.state = lstm_step(eff, nullptr, s, x).flatten();
            if (restrict_h) {
                step.jacobian.resize(static_cast<Index>(h_index.size()),
                                     static_cast<Index>(h_index.size()));
                for (size_t r = 0; r < h_index.size(); ++r)
                    for (size_t c = 0; c < h_index.size(); ++c)
                        step.jacobian(static_cast<Index>(r), static_cast<Index>(c)) =
                            jac(h_index[r], h_index[c]);
            } else {
                step.jacobian = std::move(jac);
            }
            return step;
        };
        return compute_ls_generic(system, full_dim, spec_dim, batch.samples(), batch.steps(),
                                  warmup);
    }

    RhnParams eff = apply_masks(model.rhn(), model.masks.layers);
    StepSystem system = [&](const Vec& state, Index k, Index t) {
        Vec x = model.embedding.col(batch.tokens(k, t));
        JacobianStep step;
        step.jacobian = rhn_jacobian(eff, nullptr, state, x);
        step.state = rhn_step(eff, nullptr, state, x);
        return step;
    };
    return compute_ls_generic(system, hidden, hidden, batch.samples(), batch.steps(), warmup);
}

SpectrumStats spectrum_stats(const LyapunovSpectrum& ls) {
    if (ls.dim() == 0) throw InvalidArgumentError("spectrum_stats: empty spectrum");
    SpectrumStats stats;
    stats.max = ls.exponents.maxCoeff();
    stats.min = ls.exponents.minCoeff();
    stats.mean = ls.exponents.mean();
    stats.variance = (ls.exponents.array() - stats.mean).square().sum() /
                     static_cast<double>(ls.dim());
    return stats;
}

void save_spectrum_csv(const LyapunovSpectrum& ls, const std::string& path) {
    CsvWriter writer({"index", "lambda"});
    for (Index i = 0; i < ls.dim(); ++i) {
        writer.add_row({std::to_string(i), format_double(ls.exponents(i))});
    }
    writer.save(path);
}

LyapunovSpectrum load_spectrum_csv(const std::string& path) {
    auto table = read_csv_strict(path);
    if (table.header != std::vector<std::string>{"index", "lambda"}) {
        throw InvalidDataError("not a spectrum csv: " + path);
    }
    LyapunovSpectrum ls;
    ls.exponents.resize(static_cast<Index>(table.rows.size()));
    for (size_t i = 0; i < table.rows.size(); ++i) {
        ls.exponents(static_cast<Index>(i)) = std::stod(table.rows[i][1]);
    }
    return ls;
}

}  // namespace lsh

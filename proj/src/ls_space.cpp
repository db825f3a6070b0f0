#include "lsh/ls_space.hpp"

#include "lsh/errors.hpp"

#include <cmath>

namespace lsh {

const char* to_string(EmbedMethod m) { return m == EmbedMethod::pca ? "pca" : "raw"; }
const char* to_string(Metric m) { return m == Metric::l2 ? "l2" : "cosine"; }

EmbedMethod embed_method_from_string(const std::string& s) {
    if (s == "pca") return EmbedMethod::pca;
    if (s == "raw") return EmbedMethod::raw;
    throw InvalidArgumentError("unknown embedding: " + s + " (allowed: pca, raw)");
}

Metric metric_from_string(const std::string& s) {
    if (s == "l2") return Metric::l2;
    if (s == "cosine") return Metric::cosine;
    throw InvalidArgumentError("unknown metric: " + s + " (allowed: l2, cosine)");
}

EmbeddingModel fit_embedding(const LyapunovSpectrum& reference,
                             const std::vector<LyapunovSpectrum>& histories,
                             EmbedMethod method) {
    const Index d = reference.dim();
    if (d < 1) throw InvalidArgumentError("fit_embedding: empty reference spectrum");
    for (const auto& ls : histories) {
        if (ls.dim() != d) {
            throw DimensionError("fit_embedding: spectrum length " + std::to_string(ls.dim()) +
                                 " does not match reference length " + std::to_string(d));
        }
    }

    EmbeddingModel model;
    model.method = method;
    model.input_dim = d;
    if (method == EmbedMethod::raw) return model;

    if (histories.empty()) {
        throw InsufficientDataError("fit_embedding: pca needs at least 2 spectra");
    }
    Mat points(static_cast<Index>(histories.size()) + 1, d);
    points.row(0) = reference.exponents.transpose();
    for (size_t i = 0; i < histories.size(); ++i) {
        points.row(static_cast<Index>(i) + 1) = histories[i].exponents.transpose();
    }
    const Index out_dim = std::min<Index>(2, d);
    model.pca = pca_fit(points, out_dim);
    return model;
}

Vec embed(const EmbeddingModel& model, const LyapunovSpectrum& ls) {
    if (ls.dim() != model.input_dim) {
        throw DimensionError("embed: spectrum length " + std::to_string(ls.dim()) +
                             " does not match embedding input " +
                             std::to_string(model.input_dim));
    }
    if (model.method == EmbedMethod::raw) return ls.exponents;
    return pca_project(*model.pca, ls.exponents);
}

double point_distance(const Vec& p, const Vec& q, Metric metric) {
    if (p.size() != q.size()) throw DimensionError("distance: dimension mismatch");
    if (metric == Metric::l2) return (p - q).norm();
    const double np = p.norm();
    const double nq = q.norm();
    if (np == 0.0 || nq == 0.0) {
        throw UndefinedDistanceError("cosine distance undefined for zero vectors");
    }
    return 1.0 - p.dot(q) / (np * nq);
}

double ls_distance(const EmbeddingModel& model, const LyapunovSpectrum& reference,
                   const LyapunovSpectrum& candidate, Metric metric) {
    return point_distance(embed(model, reference), embed(model, candidate), metric);
}

}  // namespace lsh

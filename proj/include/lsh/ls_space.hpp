#pragma once

#include "lsh/linalg.hpp"
#include "lsh/lyapunov.hpp"
#include "lsh/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lsh {

enum class EmbedMethod { pca, raw };
enum class Metric { l2, cosine };

const char* to_string(EmbedMethod m);
const char* to_string(Metric m);
EmbedMethod embed_method_from_string(const std::string& s);
Metric metric_from_string(const std::string& s);

// 2D projection of spectra (pca) or the identity embedding (raw).
struct EmbeddingModel {
    EmbedMethod method = EmbedMethod::pca;
    std::optional<PcaModel> pca;
    Index input_dim = 0;
};

// Fits on the union {reference} + all candidate spectra collected so far;
// refit happens at every removal round, so the space tracks training.
EmbeddingModel fit_embedding(const LyapunovSpectrum& reference,
                             const std::vector<LyapunovSpectrum>& histories,
                             EmbedMethod method);

Vec embed(const EmbeddingModel& model, const LyapunovSpectrum& ls);

// Distance between the embedded reference and the embedded candidate
// spectrum: L2, or cosine distance 1 - p.q/(|p||q|).
double ls_distance(const EmbeddingModel& model, const LyapunovSpectrum& reference,
                   const LyapunovSpectrum& candidate, Metric metric);

double point_distance(const Vec& p, const Vec& q, Metric metric);

}  // namespace lsh

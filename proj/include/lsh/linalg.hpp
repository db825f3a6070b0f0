#pragma once

#include "lsh/types.hpp"

#include <vector>

namespace lsh {

struct QrResult {
    Mat q;  // orthonormal
    Mat r;  // upper triangular, diag(r) >= 0
};

// QR of a square matrix with a fixed sign convention: whenever a diagonal
// entry of R comes out negative, the corresponding column of Q and row of R
// are flipped together. Spectrum accumulation takes log(diag(R)), so the
// diagonal must be non-negative and the factorization deterministic.
QrResult qr_decompose(const Mat& a);

// Fitted 2D (by default) projection of spectra. Component rows are
// orthonormal, ordered by descending explained variance.
struct PcaModel {
    Vec mean;        // input-dim
    Mat components;  // out_dim x input-dim, rows orthonormal

    Index out_dim() const { return components.rows(); }
    Index input_dim() const { return components.cols(); }
};

// points: one observation per row. Population (divide-by-n) covariance,
// eigendecomposition route. Components get a deterministic sign: the
// largest-magnitude coordinate of each row is made positive.
PcaModel pca_fit(const Mat& points, Index out_dim);
PcaModel pca_fit(const std::vector<Vec>& points, Index out_dim);

Vec pca_project(const PcaModel& model, const Vec& point);

}  // namespace lsh

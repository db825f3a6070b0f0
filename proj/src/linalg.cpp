#include "lsh/linalg.hpp"

#include "lsh/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <string>

namespace lsh {

QrResult qr_decompose(const Mat& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("qr_decompose: matrix must be square, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    if (!a.allFinite()) {
        throw NumericError("qr_decompose: non-finite entries");
    }
    Eigen::HouseholderQR<Mat> qr(a);
    QrResult out;
    out.q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
    out.r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < out.r.rows(); ++j) {
        if (out.r(j, j) < 0.0) {
            out.q.col(j) = -out.q.col(j);
            out.r.row(j) = -out.r.row(j);
        }
    }
    return out;
}

PcaModel pca_fit(const Mat& points, Index out_dim) {
    const Index n = points.rows();
    const Index d = points.cols();
    if (n < 2) {
        throw InsufficientDataError("pca_fit: need at least 2 points, got " +
                                    std::to_string(n));
    }
    if (out_dim < 1 || out_dim > d) {
        throw DimensionError("pca_fit: out_dim " + std::to_string(out_dim) +
                             " outside [1, " + std::to_string(d) + "]");
    }
    if (out_dim > n) {
        throw InsufficientDataError("pca_fit: out_dim " + std::to_string(out_dim) +
                                    " exceeds number of points " + std::to_string(n));
    }
    if (!points.allFinite()) {
        throw NumericError("pca_fit: non-finite entries");
    }

    PcaModel model;
    model.mean = points.colwise().mean();
    Mat centered = points.rowwise() - model.mean.transpose();
    Mat cov = (centered.transpose() * centered) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw NumericError("pca_fit: eigendecomposition failed");
    }
    // eigenvalues come back ascending; take the top out_dim in descending order
    model.components.resize(out_dim, d);
    for (Index k = 0; k < out_dim; ++k) {
        Vec v = solver.eigenvectors().col(d - 1 - k);
        Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        model.components.row(k) = v.transpose();
    }
    return model;
}

PcaModel pca_fit(const std::vector<Vec>& points, Index out_dim) {
    if (points.size() < 2) {
        throw InsufficientDataError("pca_fit: need at least 2 points, got " +
                                    std::to_string(points.size()));
    }
    const Index d = points.front().size();
    Mat m(static_cast<Index>(points.size()), d);
    for (Index i = 0; i < m.rows(); ++i) {
        if (points[static_cast<size_t>(i)].size() != d) {
            throw DimensionError("pca_fit: points have mixed dimensions");
        }
        m.row(i) = points[static_cast<size_t>(i)].transpose();
    }
    return pca_fit(m, out_dim);
}

Vec pca_project(const PcaModel& model, const Vec& point) {
    if (point.size() != model.mean.size()) {
        throw DimensionError("pca_project: point dim " + std::to_string(point.size()) +
                             " does not match model dim " +
                             std::to_string(model.mean.size()));
    }
    return model.components * (point - model.mean);
}

}  // namespace lsh

#include "lsh/linalg.hpp"

#include "lsh/errors.hpp"
#include "lsh/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace lsh;

namespace {

Mat random_mat(Rng& rng, Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("qr_decompose: identity") {
    auto [q, r] = qr_decompose(Mat::Identity(3, 3));
    CHECK((q - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((r - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("qr_decompose: sign convention forced on diag(-2, 3)") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = -2.0;
    a(1, 1) = 3.0;
    auto [q, r] = qr_decompose(a);
    CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(q(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(q(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r(0, 1)) < 1e-14);
}

TEST_CASE("qr_decompose: reconstruction of seeded 5x5") {
    Rng rng(42);
    Mat a = random_mat(rng, 5, 5);
    auto [q, r] = qr_decompose(a);
    double scale = a.cwiseAbs().maxCoeff();
    CHECK(((q * r) - a).cwiseAbs().maxCoeff() < 1e-10 * scale);
}

TEST_CASE("qr_decompose: orthonormality, triangularity, sign for sizes up to 32") {
    Rng rng(7);
    for (Index n : {1, 2, 3, 5, 8, 13, 21, 32}) {
        Mat a = random_mat(rng, n, n);
        auto [q, r] = qr_decompose(a);
        CHECK((q.transpose() * q - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
        for (Index i = 0; i < n; ++i) {
            CHECK(r(i, i) >= 0.0);
            for (Index j = 0; j < i; ++j) CHECK(r(i, j) == 0.0);
        }
        CHECK(((q * r) - a).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("qr_decompose: rejects non-square") {
    CHECK_THROWS_AS(qr_decompose(Mat::Zero(3, 4)), DimensionError);
}

TEST_CASE("pca_fit: rank-1 collinear data") {
    Mat pts(10, 3);
    for (Index i = 0; i < 10; ++i) pts.row(i) << 0.5 * static_cast<double>(i) - 2.0, 0.0, 0.0;
    auto model = pca_fit(pts, 2);
    CHECK(std::abs(std::abs(model.components(0, 0)) - 1.0) < 1e-12);
    CHECK(std::abs(model.components(0, 1)) < 1e-12);
    CHECK(std::abs(model.components(0, 2)) < 1e-12);

    // variance along the second component is numerically zero
    double var2 = 0.0;
    for (Index i = 0; i < 10; ++i) {
        Vec proj = pca_project(model, pts.row(i).transpose());
        var2 += proj(1) * proj(1);
    }
    CHECK(var2 / 10.0 < 1e-12);
}

TEST_CASE("pca: projecting the mean gives zero") {
    Rng rng(3);
    Mat pts = random_mat(rng, 20, 6);
    auto model = pca_fit(pts, 2);
    Vec z = pca_project(model, model.mean);
    CHECK(z.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca: projected variance bounded by input variance, equal at full dim") {
    Rng rng(11);
    const Index n = 50, d = 4;
    Mat pts = random_mat(rng, n, d);

    // oracle: population variances computed directly
    auto total_variance = [](const Mat& rows) {
        Vec mean = rows.colwise().mean();
        Mat centered = rows.rowwise() - mean.transpose();
        return centered.array().square().sum() / static_cast<double>(rows.rows());
    };
    double input_var = total_variance(pts);

    auto projected = [&](Index k) {
        auto model = pca_fit(pts, k);
        Mat proj(n, k);
        for (Index i = 0; i < n; ++i)
            proj.row(i) = pca_project(model, pts.row(i).transpose()).transpose();
        return total_variance(proj);
    };

    CHECK(projected(2) <= input_var + 1e-12);
    CHECK(projected(d) == doctest::Approx(input_var).epsilon(1e-10));
}

TEST_CASE("pca: errors") {
    Mat one(1, 3);
    one << 1.0, 2.0, 3.0;
    CHECK_THROWS_AS(pca_fit(one, 1), InsufficientDataError);
    Rng rng(1);
    Mat pts = random_mat(rng, 5, 3);
    CHECK_THROWS_AS(pca_fit(pts, 4), DimensionError);
    auto model = pca_fit(pts, 2);
    CHECK_THROWS_AS(pca_project(model, Vec::Zero(5)), DimensionError);
}

TEST_CASE("pca_project: contraction onto an orthonormal basis") {
    Rng rng(5);
    Mat pts = random_mat(rng, 30, 5);
    auto model = pca_fit(pts, 2);
    for (int rep = 0; rep < 10; ++rep) {
        Vec p = random_mat(rng, 5, 1);
        Vec q = random_mat(rng, 5, 1);
        double dist_in = (p - q).norm();
        double dist_out = (pca_project(model, p) - pca_project(model, q)).norm();
        CHECK(dist_out <= dist_in + 1e-12);
    }
}

TEST_CASE("pca: 1D-structured data embedded at out_dim 1 preserves distances") {
    Rng rng(9);
    const Index n = 12, d = 4;
    Vec direction = random_mat(rng, d, 1);
    direction.normalize();
    Vec offset = random_mat(rng, d, 1);
    Mat pts(n, d);
    std::vector<double> ts;
    for (Index i = 0; i < n; ++i) {
        double t = rng.uniform(-3.0, 3.0);
        ts.push_back(t);
        pts.row(i) = (offset + t * direction).transpose();
    }
    auto model = pca_fit(pts, 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            double direct = (pts.row(i) - pts.row(j)).norm();
            double embedded = std::abs(pca_project(model, pts.row(i).transpose())(0) -
                                       pca_project(model, pts.row(j).transpose())(0));
            CHECK(embedded == doctest::Approx(direct).epsilon(1e-10));
        }
    }
}

TEST_CASE("pca invariants: centered projections and orthonormal components") {
    Rng rng(13);
    for (Index d : {3, 6, 10}) {
        Mat pts = random_mat(rng, 25, d);
        auto model = pca_fit(pts, 2);

        Mat gram = model.components * model.components.transpose();
        CHECK((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

        Vec mean_proj = Vec::Zero(2);
        for (Index i = 0; i < pts.rows(); ++i)
            mean_proj += pca_project(model, pts.row(i).transpose());
        mean_proj /= static_cast<double>(pts.rows());
        CHECK(mean_proj.cwiseAbs().maxCoeff() < 1e-10);
    }
}

#include "lsh/ls_space.hpp"

#include "lsh/errors.hpp"
#include "lsh/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace lsh;

namespace {

LyapunovSpectrum spectrum(std::initializer_list<double> values) {
    LyapunovSpectrum ls;
    ls.exponents.resize(static_cast<Index>(values.size()));
    Index i = 0;
    for (double v : values) ls.exponents(i++) = v;
    return ls;
}

LyapunovSpectrum random_spectrum(Rng& rng, Index d) {
    LyapunovSpectrum ls;
    ls.exponents.resize(d);
    for (Index i = 0; i < d; ++i) ls.exponents(i) = rng.normal();
    std::sort(ls.exponents.begin(), ls.exponents.end(), std::greater<>());
    return ls;
}

}  // namespace

TEST_CASE("raw embedding is the identity") {
    auto ref = spectrum({1.0, 0.0, -1.0});
    auto model = fit_embedding(ref, {}, EmbedMethod::raw);
    auto back = embed(model, ref);
    CHECK((back - ref.exponents).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pca embedding preserves distances for spectra in a 2D affine subspace") {
    Rng rng(4);
    Vec origin(6), dir_a(6), dir_b(6);
    for (Index i = 0; i < 6; ++i) {
        origin(i) = rng.normal();
        dir_a(i) = rng.normal();
        dir_b(i) = rng.normal();
    }
    // orthonormalize the two directions
    dir_a.normalize();
    dir_b -= dir_a * dir_a.dot(dir_b);
    dir_b.normalize();

    std::vector<LyapunovSpectrum> points;
    for (int i = 0; i < 12; ++i) {
        LyapunovSpectrum ls;
        ls.exponents = origin + rng.uniform(-2.0, 2.0) * dir_a + rng.uniform(-2.0, 2.0) * dir_b;
        points.push_back(ls);
    }
    auto ref = points.front();
    std::vector<LyapunovSpectrum> rest(points.begin() + 1, points.end());
    auto model = fit_embedding(ref, rest, EmbedMethod::pca);
    CHECK(model.pca->out_dim() == 2);

    for (const auto& a : points) {
        for (const auto& b : points) {
            double direct = (a.exponents - b.exponents).norm();
            double embedded = (embed(model, a) - embed(model, b)).norm();
            CHECK(embedded == doctest::Approx(direct).epsilon(1e-8).scale(1.0));
        }
    }
}

TEST_CASE("refit with one added spectrum shifts the model") {
    Rng rng(9);
    auto ref = random_spectrum(rng, 5);
    std::vector<LyapunovSpectrum> hist = {random_spectrum(rng, 5), random_spectrum(rng, 5)};
    auto a = fit_embedding(ref, hist, EmbedMethod::pca);
    hist.push_back(random_spectrum(rng, 5));
    auto b = fit_embedding(ref, hist, EmbedMethod::pca);
    CHECK((a.pca->mean - b.pca->mean).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("ls_distance: identical spectra at zero, pythagorean case") {
    auto ref = spectrum({0.5, 0.25, -0.5, -1.0});
    auto model = fit_embedding(ref, {}, EmbedMethod::raw);
    CHECK(ls_distance(model, ref, ref, Metric::l2) == 0.0);

    auto zero = spectrum({0.0, 0.0, 0.0, 0.0});
    auto p = spectrum({3.0, 4.0, 0.0, 0.0});
    CHECK(ls_distance(model, zero, p, Metric::l2) == doctest::Approx(5.0));
}

TEST_CASE("cosine distance: orthogonal vectors at 1, bounds, zero-vector error") {
    auto a = spectrum({1.0, 0.0});
    auto b = spectrum({0.0, 1.0});
    auto model = fit_embedding(a, {}, EmbedMethod::raw);
    CHECK(ls_distance(model, a, b, Metric::cosine) == doctest::Approx(1.0));
    CHECK(ls_distance(model, a, a, Metric::cosine) == doctest::Approx(0.0));

    Rng rng(10);
    auto model4 = fit_embedding(random_spectrum(rng, 4), {}, EmbedMethod::raw);
    for (int i = 0; i < 50; ++i) {
        auto p = random_spectrum(rng, 4);
        auto q = random_spectrum(rng, 4);
        double d = ls_distance(model4, p, q, Metric::cosine);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
    }

    auto zero = spectrum({0.0, 0.0});
    CHECK_THROWS_AS(ls_distance(model, a, zero, Metric::cosine), UndefinedDistanceError);
}

TEST_CASE("raw l2 ranking is invariant under uniform positive scaling") {
    Rng rng(11);
    auto ref = random_spectrum(rng, 6);
    std::vector<LyapunovSpectrum> candidates;
    for (int i = 0; i < 8; ++i) candidates.push_back(random_spectrum(rng, 6));

    auto model = fit_embedding(ref, {}, EmbedMethod::raw);
    std::vector<double> base;
    for (const auto& c : candidates) base.push_back(ls_distance(model, ref, c, Metric::l2));

    const double scale = 3.5;
    LyapunovSpectrum ref_scaled;
    ref_scaled.exponents = ref.exponents * scale;
    std::vector<double> scaled;
    for (const auto& c : candidates) {
        LyapunovSpectrum cs;
        cs.exponents = c.exponents * scale;
        scaled.push_back(ls_distance(model, ref_scaled, cs, Metric::l2));
    }
    // distances scale by the constant; argsort unchanged
    std::vector<size_t> order_a(base.size()), order_b(base.size());
    for (size_t i = 0; i < base.size(); ++i) order_a[i] = order_b[i] = i;
    std::sort(order_a.begin(), order_a.end(), [&](size_t x, size_t y) { return base[x] < base[y]; });
    std::sort(order_b.begin(), order_b.end(),
              [&](size_t x, size_t y) { return scaled[x] < scaled[y]; });
    CHECK(order_a == order_b);
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(scaled[i] == doctest::Approx(scale * base[i]).epsilon(1e-12));
    }
}

TEST_CASE("fit_embedding errors: mixed lengths and insufficient data") {
    auto ref = spectrum({1.0, 2.0, 3.0});
    std::vector<LyapunovSpectrum> bad = {spectrum({1.0, 2.0})};
    CHECK_THROWS_AS(fit_embedding(ref, bad, EmbedMethod::pca), DimensionError);
    CHECK_THROWS_AS(fit_embedding(ref, {}, EmbedMethod::pca), InsufficientDataError);
}

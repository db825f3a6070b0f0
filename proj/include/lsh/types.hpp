#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace lsh {

// Dense double-precision types used throughout. Spectrum estimation takes
// logs of QR diagonals, so everything on that path stays in f64.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IntMat = Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

struct Shape {
    Index rows = 0;
    Index cols = 0;

    Index size() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
};

inline Shape shape_of(const Mat& m) { return {m.rows(), m.cols()}; }

}  // namespace lsh

#pragma once

#include "lsh/types.hpp"

#include <functional>
#include <vector>

namespace lsh {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// sech^2 via 1 - tanh^2; stable for large |z|
inline double sech2(double z) {
    double t = std::tanh(z);
    return 1.0 - t * t;
}

// ---------------------------------------------------------------------------
// Stacked LSTM
// ---------------------------------------------------------------------------

struct LstmLayerParams {
    Mat Wf, Wi, Wo, Wc;  // input weights, hidden x input
    Mat Uf, Ui, Uo, Uc;  // recurrent weights, hidden x hidden
    Vec bf, bi, bo, bc;  // biases, hidden

    Index hidden() const { return Uf.rows(); }
    Index input() const { return Wf.cols(); }
};

struct StackedLstmParams {
    std::vector<LstmLayerParams> layers;

    Index num_layers() const { return static_cast<Index>(layers.size()); }
    Index hidden() const { return layers.front().hidden(); }
    Index input() const { return layers.front().input(); }
    // dynamical state is (h, c) per layer
    Index state_dim() const { return 2 * num_layers() * hidden(); }
};

// ---------------------------------------------------------------------------
// Recurrent Highway Network
// ---------------------------------------------------------------------------

// Input matrices act only at depth 1. When coupled, the carry gate is
// c = 1 - e and Wc/Rc/bc stay empty: the gate is never parameterized.
struct RhnParams {
    Mat Wp, We, Wc;      // hidden x input
    std::vector<Mat> Rp, Re, Rc;  // per-depth recurrent, hidden x hidden
    std::vector<Vec> bp, be, bc;  // per-depth biases
    Index depth = 0;
    bool coupled = false;

    Index hidden() const { return Rp.front().rows(); }
    Index input() const { return Wp.cols(); }
    Index state_dim() const { return hidden(); }
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

struct NetworkState {
    std::vector<Vec> h;  // per layer
    std::vector<Vec> c;  // per layer, LSTM only (empty for RHN)

    Index dim() const;
    Vec flatten() const;  // [h1, c1, h2, c2, ...] (RHN: just h1)
    static NetworkState unflatten(const Vec& v, Index layers, Index hidden, bool has_cell);
    static NetworkState zero(Index layers, Index hidden, bool has_cell);
};

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

// Prunable weight matrices in canonical order. Biases stay dense.
//   LSTM: per layer  [Wf, Wi, Wo, Wc, Uf, Ui, Uo, Uc]
//   RHN:  [Wp, We, (Wc)] then per depth [Rp, Re, (Rc)]; carry entries only
//         when uncoupled.
std::vector<Shape> prunable_shapes(const StackedLstmParams& p);
std::vector<Shape> prunable_shapes(const RhnParams& p);

// Materializes weight .cwiseProduct(mask) over the canonical order. The
// masked step/jacobian path is: apply mask once, then run the dense kernel,
// so a pre-masked dense model follows the identical arithmetic path.
StackedLstmParams apply_masks(const StackedLstmParams& p, const std::vector<Mat>& masks);
RhnParams apply_masks(const RhnParams& p, const std::vector<Mat>& masks);

// ---------------------------------------------------------------------------
// Forward dynamics and state-transition Jacobians
// ---------------------------------------------------------------------------

// One time step through the stack; layer l consumes layer l-1's fresh h
// (layer 1 consumes x). masks may be null for dense evaluation.
NetworkState lstm_step(const StackedLstmParams& params, const std::vector<Mat>* masks,
                       const NetworkState& state, const Vec& x);

// Full Jacobian of the new flattened state w.r.t. the old one, ordered
// [h1, c1, h2, c2, ...]. Within a layer the four blocks are
//   dh/dh, dh/dc = diag(o sech2(c) f), dc/dh, dc/dc = diag(f);
// cross-layer blocks chain through d./dx with x = fresh h below, giving a
// block lower-triangular structure in layer order.
Mat lstm_jacobian(const StackedLstmParams& params, const std::vector<Mat>* masks,
                  const NetworkState& state, const Vec& x);

// Highway recurrence for depth 1..L; h is the previous step's depth-L output.
Vec rhn_step(const RhnParams& params, const std::vector<Mat>* masks,
             const Vec& h, const Vec& x);

// Product of per-depth Jacobians. Coupled carry contributes the e-derivative
// with opposite sign.
Mat rhn_jacobian(const RhnParams& params, const std::vector<Mat>* masks,
                 const Vec& h, const Vec& x);

// Central-difference Jacobian oracle: column j uses f(p +/- eps e_j).
Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& point,
                         double eps);

// ---------------------------------------------------------------------------
// Initialization: uniform in [-1/sqrt(hidden), +1/sqrt(hidden)], seeded.
// ---------------------------------------------------------------------------

StackedLstmParams init_lstm(Index input_dim, Index hidden, Index layers, uint64_t seed);
RhnParams init_rhn(Index input_dim, Index hidden, Index depth, bool coupled, uint64_t seed);

}  // namespace lsh

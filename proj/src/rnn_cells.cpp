#include "lsh/rnn_cells.hpp"

#include "lsh/errors.hpp"
#include "lsh/rng.hpp"

#include <string>

namespace lsh {

// ---------------------------------------------------------------------------
// NetworkState
// ---------------------------------------------------------------------------

Index NetworkState::dim() const {
    Index n = 0;
    for (const auto& v : h) n += v.size();
    for (const auto& v : c) n += v.size();
    return n;
}

Vec NetworkState::flatten() const {
    Vec out(dim());
    Index pos = 0;
    for (size_t l = 0; l < h.size(); ++l) {
        out.segment(pos, h[l].size()) = h[l];
        pos += h[l].size();
        if (l < c.size()) {
            out.segment(pos, c[l].size()) = c[l];
            pos += c[l].size();
        }
    }
    return out;
}

NetworkState NetworkState::unflatten(const Vec& v, Index layers, Index hidden, bool has_cell) {
    const Index expected = layers * hidden * (has_cell ? 2 : 1);
    if (v.size() != expected) {
        throw DimensionError("unflatten: vector size " + std::to_string(v.size()) +
                             " != expected " + std::to_string(expected));
    }
    NetworkState s;
    Index pos = 0;
    for (Index l = 0; l < layers; ++l) {
        s.h.push_back(v.segment(pos, hidden));
        pos += hidden;
        if (has_cell) {
            s.c.push_back(v.segment(pos, hidden));
            pos += hidden;
        }
    }
    return s;
}

NetworkState NetworkState::zero(Index layers, Index hidden, bool has_cell) {
    NetworkState s;
    for (Index l = 0; l < layers; ++l) {
        s.h.push_back(Vec::Zero(hidden));
        if (has_cell) s.c.push_back(Vec::Zero(hidden));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

std::vector<Shape> prunable_shapes(const StackedLstmParams& p) {
    std::vector<Shape> shapes;
    for (const auto& l : p.layers) {
        shapes.push_back(shape_of(l.Wf));
        shapes.push_back(shape_of(l.Wi));
        shapes.push_back(shape_of(l.Wo));
        shapes.push_back(shape_of(l.Wc));
        shapes.push_back(shape_of(l.Uf));
        shapes.push_back(shape_of(l.Ui));
        shapes.push_back(shape_of(l.Uo));
        shapes.push_back(shape_of(l.Uc));
    }
    return shapes;
}

std::vector<Shape> prunable_shapes(const RhnParams& p) {
    std::vector<Shape> shapes;
    shapes.push_back(shape_of(p.Wp));
    shapes.push_back(shape_of(p.We));
    if (!p.coupled) shapes.push_back(shape_of(p.Wc));
    for (Index l = 0; l < p.depth; ++l) {
        shapes.push_back(shape_of(p.Rp[static_cast<size_t>(l)]));
        shapes.push_back(shape_of(p.Re[static_cast<size_t>(l)]));
        if (!p.coupled) shapes.push_back(shape_of(p.Rc[static_cast<size_t>(l)]));
    }
    return shapes;
}

static void check_mask_count(size_t expected, size_t got) {
    if (expected != got) {
        throw DimensionError("mask count " + std::to_string(got) +
                             " does not match prunable layer count " +
                             std::to_string(expected));
    }
}

static Mat masked(const Mat& w, const Mat& m) {
    if (w.rows() != m.rows() || w.cols() != m.cols()) {
        throw DimensionError("mask shape mismatch");
    }
    return w.cwiseProduct(m);
}

StackedLstmParams apply_masks(const StackedLstmParams& p, const std::vector<Mat>& masks) {
    check_mask_count(static_cast<size_t>(p.num_layers()) * 8, masks.size());
    StackedLstmParams out = p;
    size_t k = 0;
    for (auto& l : out.layers) {
        l.Wf = masked(l.Wf, masks[k++]);
        l.Wi = masked(l.Wi, masks[k++]);
        l.Wo = masked(l.Wo, masks[k++]);
        l.Wc = masked(l.Wc, masks[k++]);
        l.Uf = masked(l.Uf, masks[k++]);
        l.Ui = masked(l.Ui, masks[k++]);
        l.Uo = masked(l.Uo, masks[k++]);
        l.Uc = masked(l.Uc, masks[k++]);
    }
    return out;
}

RhnParams apply_masks(const RhnParams& p, const std::vector<Mat>& masks) {
    check_mask_count(prunable_shapes(p).size(), masks.size());
    RhnParams out = p;
    size_t k = 0;
    out.Wp = masked(out.Wp, masks[k++]);
    out.We = masked(out.We, masks[k++]);
    if (!p.coupled) out.Wc = masked(out.Wc, masks[k++]);
    for (Index l = 0; l < p.depth; ++l) {
        auto i = static_cast<size_t>(l);
        out.Rp[i] = masked(out.Rp[i], masks[k++]);
        out.Re[i] = masked(out.Re[i], masks[k++]);
        if (!p.coupled) out.Rc[i] = masked(out.Rc[i], masks[k++]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// LSTM forward / Jacobian
// ---------------------------------------------------------------------------

namespace {

struct LstmGateEval {
    Vec f, i, o, g;     // gate activations; g = tanh(y_c)
    Vec sf, si, so;     // sigmoid derivatives f(1-f) etc.
    Vec c_new, h_new;
    Vec tanh_c;         // tanh(c_new)
};

LstmGateEval eval_lstm_layer(const LstmLayerParams& p, const Vec& h_prev,
                             const Vec& c_prev, const Vec& x) {
    LstmGateEval e;
    Vec yf = p.Wf * x + p.Uf * h_prev + p.bf;
    Vec yi = p.Wi * x + p.Ui * h_prev + p.bi;
    Vec yo = p.Wo * x + p.Uo * h_prev + p.bo;
    Vec yc = p.Wc * x + p.Uc * h_prev + p.bc;
    e.f = yf.unaryExpr([](double z) { return sigmoid(z); });
    e.i = yi.unaryExpr([](double z) { return sigmoid(z); });
    e.o = yo.unaryExpr([](double z) { return sigmoid(z); });
    e.g = yc.array().tanh().matrix();
    e.sf = (e.f.array() * (1.0 - e.f.array())).matrix();
    e.si = (e.i.array() * (1.0 - e.i.array())).matrix();
    e.so = (e.o.array() * (1.0 - e.o.array())).matrix();
    e.c_new = e.f.cwiseProduct(c_prev) + e.i.cwiseProduct(e.g);
    e.tanh_c = e.c_new.array().tanh().matrix();
    e.h_new = e.o.cwiseProduct(e.tanh_c);
    return e;
}

void check_lstm_input(const StackedLstmParams& params, const NetworkState& state,
                      const Vec& x) {
    if (state.h.size() != params.layers.size() || state.c.size() != params.layers.size()) {
        throw DimensionError("lstm: state layer count mismatch");
    }
    if (x.size() != params.input()) {
        throw DimensionError("lstm: input dim " + std::to_string(x.size()) +
                             " != expected " + std::to_string(params.input()));
    }
    if (!x.allFinite()) throw NumericError("lstm: non-finite input");
    for (const auto& h : state.h) {
        if (!h.allFinite()) throw NumericError("lstm: non-finite state");
    }
}

}  // namespace

NetworkState lstm_step(const StackedLstmParams& params, const std::vector<Mat>* masks,
                       const NetworkState& state, const Vec& x) {
    if (masks) return lstm_step(apply_masks(params, *masks), nullptr, state, x);
    check_lstm_input(params, state, x);
    NetworkState out;
    Vec input = x;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        auto e = eval_lstm_layer(params.layers[l], state.h[l], state.c[l], input);
        out.h.push_back(e.h_new);
        out.c.push_back(e.c_new);
        input = e.h_new;
    }
    return out;
}

Mat lstm_jacobian(const StackedLstmParams& params, const std::vector<Mat>* masks,
                  const NetworkState& state, const Vec& x) {
    if (masks) return lstm_jacobian(apply_masks(params, *masks), nullptr, state, x);
    check_lstm_input(params, state, x);

    const Index L = params.num_layers();
    const Index n = params.hidden();
    const Index N = params.state_dim();
    Mat jac = Mat::Zero(N, N);

    // Dh_prev: d(fresh h of layer below)/d(old flattened state)
    Mat dh_below;  // n x N, valid for l > 0
    Vec input = x;
    for (Index l = 0; l < L; ++l) {
        const auto& p = params.layers[static_cast<size_t>(l)];
        const Vec& h_prev = state.h[static_cast<size_t>(l)];
        const Vec& c_prev = state.c[static_cast<size_t>(l)];
        auto e = eval_lstm_layer(p, h_prev, c_prev, input);

        Vec sech2_c = (1.0 - e.tanh_c.array().square()).matrix();
        Vec sech2_yc = (1.0 - e.g.array().square()).matrix();

        // within-layer blocks w.r.t. this layer's own (h, c)
        Mat dc_dh = (c_prev.cwiseProduct(e.sf)).asDiagonal() * p.Uf
                  + (e.g.cwiseProduct(e.si)).asDiagonal() * p.Ui
                  + (e.i.cwiseProduct(sech2_yc)).asDiagonal() * p.Uc;
        Mat dh_dh = (e.tanh_c.cwiseProduct(e.so)).asDiagonal() * p.Uo
                  + (e.o.cwiseProduct(sech2_c)).asDiagonal() * dc_dh;
        Vec dc_dc = e.f;
        Vec dh_dc = e.o.cwiseProduct(sech2_c).cwiseProduct(e.f);

        Mat dh_row = Mat::Zero(n, N);
        Mat dc_row = Mat::Zero(n, N);
        const Index off = 2 * l * n;
        dh_row.middleCols(off, n) = dh_dh;
        dh_row.middleCols(off + n, n) = Mat(dh_dc.asDiagonal());
        dc_row.middleCols(off, n) = dc_dh;
        dc_row.middleCols(off + n, n) = Mat(dc_dc.asDiagonal());

        if (l > 0) {
            // chain through x = fresh h of the layer below
            Mat dc_dx = (c_prev.cwiseProduct(e.sf)).asDiagonal() * p.Wf
                      + (e.g.cwiseProduct(e.si)).asDiagonal() * p.Wi
                      + (e.i.cwiseProduct(sech2_yc)).asDiagonal() * p.Wc;
            Mat dh_dx = (e.tanh_c.cwiseProduct(e.so)).asDiagonal() * p.Wo
                      + (e.o.cwiseProduct(sech2_c)).asDiagonal() * dc_dx;
            dh_row.noalias() += dh_dx * dh_below;
            dc_row.noalias() += dc_dx * dh_below;
        }

        jac.middleRows(off, n) = dh_row;
        jac.middleRows(off + n, n) = dc_row;
        dh_below = dh_row;
        input = e.h_new;
    }
    return jac;
}

// ---------------------------------------------------------------------------
// RHN forward / Jacobian
// ---------------------------------------------------------------------------

namespace {

struct RhnDepthEval {
    Vec p, e, c;
    Vec dp, de, dc;  // activation derivatives w.r.t. pre-activations
    Vec h_new;
};

RhnDepthEval eval_rhn_depth(const RhnParams& params, Index l, const Vec& h_in,
                            const Vec& x) {
    auto i = static_cast<size_t>(l);
    const bool first = (l == 0);
    RhnDepthEval e;
    Vec ap = params.Rp[i] * h_in + params.bp[i];
    Vec ae = params.Re[i] * h_in + params.be[i];
    if (first) {
        ap += params.Wp * x;
        ae += params.We * x;
    }
    e.p = ap.array().tanh().matrix();
    e.e = ae.unaryExpr([](double z) { return sigmoid(z); });
    e.dp = (1.0 - e.p.array().square()).matrix();
    e.de = (e.e.array() * (1.0 - e.e.array())).matrix();
    if (params.coupled) {
        e.c = (1.0 - e.e.array()).matrix();
        e.dc = Vec();  // carries no independent parameters
    } else {
        Vec ac = params.Rc[i] * h_in + params.bc[i];
        if (first) ac += params.Wc * x;
        e.c = ac.unaryExpr([](double z) { return sigmoid(z); });
        e.dc = (e.c.array() * (1.0 - e.c.array())).matrix();
    }
    e.h_new = e.p.cwiseProduct(e.e) + h_in.cwiseProduct(e.c);
    return e;
}

void check_rhn_input(const RhnParams& params, const Vec& h, const Vec& x) {
    if (h.size() != params.hidden()) {
        throw DimensionError("rhn: state dim " + std::to_string(h.size()) +
                             " != hidden " + std::to_string(params.hidden()));
    }
    if (x.size() != params.input()) {
        throw DimensionError("rhn: input dim mismatch");
    }
    if (!h.allFinite() || !x.allFinite()) throw NumericError("rhn: non-finite input");
}

}  // namespace

Vec rhn_step(const RhnParams& params, const std::vector<Mat>* masks,
             const Vec& h, const Vec& x) {
    if (masks) return rhn_step(apply_masks(params, *masks), nullptr, h, x);
    check_rhn_input(params, h, x);
    Vec cur = h;
    for (Index l = 0; l < params.depth; ++l) {
        cur = eval_rhn_depth(params, l, cur, x).h_new;
    }
    return cur;
}

Mat rhn_jacobian(const RhnParams& params, const std::vector<Mat>* masks,
                 const Vec& h, const Vec& x) {
    if (masks) return rhn_jacobian(apply_masks(params, *masks), nullptr, h, x);
    check_rhn_input(params, h, x);
    const Index n = params.hidden();
    Mat jac = Mat::Identity(n, n);
    Vec cur = h;
    for (Index l = 0; l < params.depth; ++l) {
        auto i = static_cast<size_t>(l);
        auto e = eval_rhn_depth(params, l, cur, x);
        // dh_l/dh_{l-1} = diag(e dp) Rp + diag(p de) Re + diag(c) + carry term
        Mat step = (e.e.cwiseProduct(e.dp)).asDiagonal() * params.Rp[i]
                 + (e.p.cwiseProduct(e.de)).asDiagonal() * params.Re[i];
        step += Mat(e.c.asDiagonal());
        if (params.coupled) {
            // c = 1 - e: the carry contributes -de through Re
            step -= (cur.cwiseProduct(e.de)).asDiagonal() * params.Re[i];
        } else {
            step += (cur.cwiseProduct(e.dc)).asDiagonal() * params.Rc[i];
        }
        jac = step * jac;
        cur = e.h_new;
    }
    return jac;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& point,
                         double eps) {
    if (!(eps > 0.0)) throw InvalidArgumentError("finite_diff_jacobian: eps must be > 0");
    const Index rows = f(point).size();
    Mat jac(rows, point.size());
    for (Index j = 0; j < point.size(); ++j) {
        Vec plus = point, minus = point;
        plus(j) += eps;
        minus(j) -= eps;
        jac.col(j) = (f(plus) - f(minus)) / (2.0 * eps);
    }
    return jac;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace {

Mat uniform_mat(Rng& rng, Index rows, Index cols, double bound) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

StackedLstmParams init_lstm(Index input_dim, Index hidden, Index layers, uint64_t seed) {
    if (input_dim < 1 || hidden < 1 || layers < 1) {
        throw InvalidArgumentError("init_lstm: dimensions must be positive");
    }
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    StackedLstmParams params;
    for (Index l = 0; l < layers; ++l) {
        const Index in = (l == 0) ? input_dim : hidden;
        LstmLayerParams p;
        p.Wf = uniform_mat(rng, hidden, in, bound);
        p.Wi = uniform_mat(rng, hidden, in, bound);
        p.Wo = uniform_mat(rng, hidden, in, bound);
        p.Wc = uniform_mat(rng, hidden, in, bound);
        p.Uf = uniform_mat(rng, hidden, hidden, bound);
        p.Ui = uniform_mat(rng, hidden, hidden, bound);
        p.Uo = uniform_mat(rng, hidden, hidden, bound);
        p.Uc = uniform_mat(rng, hidden, hidden, bound);
        p.bf = Vec::Zero(hidden);
        p.bi = Vec::Zero(hidden);
        p.bo = Vec::Zero(hidden);
        p.bc = Vec::Zero(hidden);
        params.layers.push_back(std::move(p));
    }
    return params;
}

RhnParams init_rhn(Index input_dim, Index hidden, Index depth, bool coupled, uint64_t seed) {
    if (input_dim < 1 || hidden < 1 || depth < 1) {
        throw InvalidArgumentError("init_rhn: dimensions must be positive");
    }
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    RhnParams params;
    params.depth = depth;
    params.coupled = coupled;
    params.Wp = uniform_mat(rng, hidden, input_dim, bound);
    params.We = uniform_mat(rng, hidden, input_dim, bound);
    params.Wc = coupled ? Mat() : uniform_mat(rng, hidden, input_dim, bound);
    for (Index l = 0; l < depth; ++l) {
        params.Rp.push_back(uniform_mat(rng, hidden, hidden, bound));
        params.Re.push_back(uniform_mat(rng, hidden, hidden, bound));
        if (!coupled) params.Rc.push_back(uniform_mat(rng, hidden, hidden, bound));
        params.bp.push_back(Vec::Zero(hidden));
        params.be.push_back(Vec::Zero(hidden));
        if (!coupled) params.bc.push_back(Vec::Zero(hidden));
    }
    return params;
}

}  // namespace lsh

#include "lsh/training.hpp"

#include "lsh/errors.hpp"
#include "lsh/sparsity.hpp"

#include <cmath>
#include <string>

namespace lsh {

// ---------------------------------------------------------------------------
// NT-ASGD trigger and averaging
// ---------------------------------------------------------------------------

bool ntasgd_trigger(const std::vector<double>& history, long nonmono) {
    const long n = static_cast<long>(history.size());
    if (n <= nonmono) return false;
    double best = history[0];
    for (long i = 1; i < n - nonmono; ++i) best = std::min(best, history[static_cast<size_t>(i)]);
    return history.back() >= best;
}

void OptimizerState::observe_val_loss(double loss) {
    val_loss_history.push_back(loss);
    if (!averaging_active && ntasgd_trigger(val_loss_history, nonmono)) {
        averaging_active = true;
        averaged_steps = 0;
        avg_mats.clear();
        avg_vecs.clear();
    }
}

namespace {

void accumulate_average(OptimizerState& opt, SparseModel& model) {
    auto refs = collect_params(model);
    if (opt.avg_mats.empty()) {
        for (const Mat* m : refs.mats) opt.avg_mats.push_back(Mat::Zero(m->rows(), m->cols()));
        for (const Vec* v : refs.vecs) opt.avg_vecs.push_back(Vec::Zero(v->size()));
    }
    const double k = static_cast<double>(++opt.averaged_steps);
    for (size_t i = 0; i < refs.mats.size(); ++i) {
        opt.avg_mats[i] += (*refs.mats[i] - opt.avg_mats[i]) / k;
    }
    for (size_t i = 0; i < refs.vecs.size(); ++i) {
        opt.avg_vecs[i] += (*refs.vecs[i] - opt.avg_vecs[i]) / k;
    }
}

// ---------------------------------------------------------------------------
// Batched forward/backward.
//
// Layer-major layout: all per-step tensors for a block live in n x (B*T)
// buffers whose column slice [t*B, t*B+B) is time step t. The input-side
// products become one GEMM per gate per block; only the recurrent products
// stay per-step. Gradients accumulate into a zeroed structural copy of the
// model, so parameter and gradient tensors stay aligned via collect_params.
// ---------------------------------------------------------------------------

// tanh via the vectorized exp kernel; Eigen's double tanh is scalar libm
template <class Derived>
inline auto fast_tanh(const Eigen::ArrayBase<Derived>& x) {
    return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

struct LstmLayerCache {
    Mat f, i, o, g, c, tanh_c, h;  // n x B*T
};

struct RhnDepthCache {
    Mat p, e, c, h_in;  // n x B*T
};

struct Workspace {
    Index batch = 0, bptt = 0;
    std::vector<Mat> h_carry, c_carry;  // recurrent carry across blocks, n x B
    std::vector<Mat> h0, c0;            // carry at the current block's entry
    Mat x_all;                          // e x B*T embedding columns
    std::vector<LstmLayerCache> lstm;   // per layer
    std::vector<RhnDepthCache> rhn;     // per depth
    Mat rhn_out;                        // n x B*T, raw depth-L outputs
    Mat h_top;                          // n x B*T decoder input (post dropout)
    Mat drop_mask;                      // n x B*T or empty
    Mat dlogits;                        // V x B*T

    void reset_carry(const SparseModel& model, Index batch_size) {
        const Index n = model.profile.hidden;
        const Index layers = model.is_lstm() ? model.lstm().num_layers() : 1;
        h_carry.assign(static_cast<size_t>(layers), Mat::Zero(n, batch_size));
        c_carry.assign(model.is_lstm() ? static_cast<size_t>(layers) : 0,
                       Mat::Zero(n, batch_size));
    }
};

void gather_embedding(const Mat& embedding, const IntMat& tokens, Mat& x_all) {
    const Index batch = tokens.rows();
    const Index bptt = tokens.cols();
    x_all.resize(embedding.rows(), batch * bptt);
    for (Index t = 0; t < bptt; ++t)
        for (Index b = 0; b < batch; ++b) x_all.col(t * batch + b) = embedding.col(tokens(b, t));
}

// Cross-entropy over all columns; logits buffer is consumed in place and
// becomes softmax - onehot.
double softmax_xent_all(Mat& logits, const IntMat& targets) {
    const Index batch = targets.rows();
    double loss = 0.0;
    for (Index col = 0; col < logits.cols(); ++col) {
        const Index t = col / batch;
        const Index b = col % batch;
        auto z = logits.col(col);
        const double m = z.maxCoeff();
        z = (z.array() - m).exp();
        const double sum = z.sum();
        loss += std::log(sum) + m - (std::log(z(targets(b, t))) + m);
        z /= sum;
        z(targets(b, t)) -= 1.0;
    }
    return loss;
}

Mat decoder_logits(const SparseModel& model, const Mat& h) {
    Mat logits = model.profile.tied ? (model.embedding.transpose() * h).eval()
                                    : (model.decoder_w * h).eval();
    logits.colwise() += model.decoder_b;
    return logits;
}

void maybe_dropout(const SparseModel& model, bool training, OptimizerState* opt,
                   Mat& h_top, Mat& mask_store) {
    const double p = model.profile.dropout_output;
    if (!training || p <= 0.0) {
        mask_store.resize(0, 0);
        return;
    }
    const double keep = 1.0 - p;
    mask_store.resize(h_top.rows(), h_top.cols());
    for (Index c = 0; c < mask_store.cols(); ++c)
        for (Index r = 0; r < mask_store.rows(); ++r)
            mask_store(r, c) = (opt->dropout_rng.uniform() < keep) ? 1.0 / keep : 0.0;
    h_top = h_top.cwiseProduct(mask_store);
}

// Returns summed cross-entropy over the block's tokens.
double forward_block(const SparseModel& model, const Batch& batch, Workspace& ws,
                     bool training, OptimizerState* opt) {
    const Index B = batch.input.rows();
    const Index T = batch.input.cols();
    const Index n = model.profile.hidden;
    ws.batch = B;
    ws.bptt = T;
    ws.h0 = ws.h_carry;
    ws.c0 = ws.c_carry;
    gather_embedding(model.embedding, batch.input, ws.x_all);

    if (model.is_lstm()) {
        const auto& rnn = model.lstm();
        const size_t L = rnn.layers.size();
        ws.lstm.resize(L);
        for (size_t l = 0; l < L; ++l) {
            const auto& p = rnn.layers[l];
            auto& cache = ws.lstm[l];
            const Mat& in_all = (l == 0) ? ws.x_all : ws.lstm[l - 1].h;
            // input-side products for the whole block
            cache.f.noalias() = p.Wf * in_all;
            cache.i.noalias() = p.Wi * in_all;
            cache.o.noalias() = p.Wo * in_all;
            cache.g.noalias() = p.Wc * in_all;
            cache.c.resize(n, B * T);
            cache.tanh_c.resize(n, B * T);
            cache.h.resize(n, B * T);
            for (Index t = 0; t < T; ++t) {
                const Mat h_prev = (t == 0) ? ws.h0[l] : Mat(cache.h.middleCols((t - 1) * B, B));
                const Mat c_prev = (t == 0) ? ws.c0[l] : Mat(cache.c.middleCols((t - 1) * B, B));
                auto f = cache.f.middleCols(t * B, B);
                auto i = cache.i.middleCols(t * B, B);
                auto o = cache.o.middleCols(t * B, B);
                auto g = cache.g.middleCols(t * B, B);
                f.noalias() += p.Uf * h_prev;
                i.noalias() += p.Ui * h_prev;
                o.noalias() += p.Uo * h_prev;
                g.noalias() += p.Uc * h_prev;
                f = (1.0 / (1.0 + (-(f.colwise() + p.bf)).array().exp())).matrix();
                i = (1.0 / (1.0 + (-(i.colwise() + p.bi)).array().exp())).matrix();
                o = (1.0 / (1.0 + (-(o.colwise() + p.bo)).array().exp())).matrix();
                g = fast_tanh((g.colwise() + p.bc).array()).matrix();
                cache.c.middleCols(t * B, B) = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
                cache.tanh_c.middleCols(t * B, B) =
                    fast_tanh(cache.c.middleCols(t * B, B).array()).matrix();
                cache.h.middleCols(t * B, B) =
                    o.cwiseProduct(cache.tanh_c.middleCols(t * B, B));
            }
        }
        for (size_t l = 0; l < L; ++l) {
            ws.h_carry[l] = ws.lstm[l].h.middleCols((T - 1) * B, B);
            ws.c_carry[l] = ws.lstm[l].c.middleCols((T - 1) * B, B);
        }
        ws.h_top = ws.lstm[L - 1].h;
    } else {
        const auto& rnn = model.rhn();
        const auto D = static_cast<size_t>(rnn.depth);
        ws.rhn.resize(D);
        for (size_t l = 0; l < D; ++l) {
            auto& cache = ws.rhn[l];
            cache.p.resize(n, B * T);
            cache.e.resize(n, B * T);
            cache.c.resize(n, B * T);
            cache.h_in.resize(n, B * T);
        }
        // input terms act only at depth 1
        Mat px, ex, cx;
        px.noalias() = rnn.Wp * ws.x_all;
        ex.noalias() = rnn.We * ws.x_all;
        if (!rnn.coupled) cx.noalias() = rnn.Wc * ws.x_all;
        ws.rhn_out.resize(n, B * T);
        for (Index t = 0; t < T; ++t) {
            Mat h = (t == 0) ? ws.h0[0] : Mat(ws.rhn_out.middleCols((t - 1) * B, B));
            for (size_t l = 0; l < D; ++l) {
                auto& cache = ws.rhn[l];
                cache.h_in.middleCols(t * B, B) = h;
                Mat ap = (rnn.Rp[l] * h).colwise() + rnn.bp[l];
                Mat ae = (rnn.Re[l] * h).colwise() + rnn.be[l];
                if (l == 0) {
                    ap += px.middleCols(t * B, B);
                    ae += ex.middleCols(t * B, B);
                }
                cache.p.middleCols(t * B, B) = fast_tanh(ap.array()).matrix();
                cache.e.middleCols(t * B, B) = (1.0 / (1.0 + (-ae.array()).exp())).matrix();
                if (rnn.coupled) {
                    cache.c.middleCols(t * B, B) =
                        (1.0 - cache.e.middleCols(t * B, B).array()).matrix();
                } else {
                    Mat ac = (rnn.Rc[l] * h).colwise() + rnn.bc[l];
                    if (l == 0) ac += cx.middleCols(t * B, B);
                    cache.c.middleCols(t * B, B) = (1.0 / (1.0 + (-ac.array()).exp())).matrix();
                }
                h = cache.p.middleCols(t * B, B).cwiseProduct(cache.e.middleCols(t * B, B)) +
                    h.cwiseProduct(cache.c.middleCols(t * B, B));
            }
            ws.rhn_out.middleCols(t * B, B) = h;
        }
        ws.h_carry[0] = ws.rhn_out.middleCols((T - 1) * B, B);
        ws.h_top = ws.rhn_out;
    }

    maybe_dropout(model, training, opt, ws.h_top, ws.drop_mask);
    ws.dlogits = decoder_logits(model, ws.h_top);
    return softmax_xent_all(ws.dlogits, batch.target);
}

// Backward through one block, accumulating into the gradient shadow model.
void backward_block(const SparseModel& model, SparseModel& grads, const Batch& batch,
                    Workspace& ws, double tokens_per_block) {
    const Index B = ws.batch;
    const Index T = ws.bptt;
    const Index n = model.profile.hidden;

    Mat dlog = ws.dlogits / tokens_per_block;
    grads.decoder_b += dlog.rowwise().sum();
    Mat dh_top;
    if (model.profile.tied) {
        grads.embedding.noalias() += ws.h_top * dlog.transpose();
        dh_top.noalias() = model.embedding * dlog;
    } else {
        grads.decoder_w.noalias() += dlog * ws.h_top.transpose();
        dh_top.noalias() = model.decoder_w.transpose() * dlog;
    }
    if (ws.drop_mask.size() > 0) dh_top = dh_top.cwiseProduct(ws.drop_mask);

    auto scatter_embedding = [&](const Mat& dx_all) {
        for (Index t = 0; t < T; ++t)
            for (Index b = 0; b < B; ++b)
                grads.embedding.col(batch.input(b, t)) += dx_all.col(t * B + b);
    };

    // h_prev sequence: [carry | outputs shifted right by one step]
    auto build_prev = [&](const Mat& outputs, const Mat& carry) {
        Mat prev(n, B * T);
        prev.leftCols(B) = carry;
        if (T > 1) prev.rightCols(B * (T - 1)) = outputs.leftCols(B * (T - 1));
        return prev;
    };

    if (model.is_lstm()) {
        const auto& rnn = model.lstm();
        auto& grnn = grads.lstm();
        const size_t L = rnn.layers.size();
        Mat d_in_all = dh_top;  // gradient w.r.t. the layer's output sequence
        Mat dyf(n, B * T), dyi(n, B * T), dyo(n, B * T), dyg(n, B * T);
        for (size_t l = L; l-- > 0;) {
            const auto& p = rnn.layers[l];
            auto& gp = grnn.layers[l];
            const auto& cache = ws.lstm[l];
            Mat dh_carry = Mat::Zero(n, B);
            Mat dc_carry = Mat::Zero(n, B);
            for (Index t = T - 1; t >= 0; --t) {
                auto f = cache.f.middleCols(t * B, B);
                auto i = cache.i.middleCols(t * B, B);
                auto o = cache.o.middleCols(t * B, B);
                auto g = cache.g.middleCols(t * B, B);
                auto tanh_c = cache.tanh_c.middleCols(t * B, B);
                const Mat c_prev = (t == 0) ? ws.c0[l] : Mat(cache.c.middleCols((t - 1) * B, B));

                Mat dh = d_in_all.middleCols(t * B, B) + dh_carry;
                Mat dc = dc_carry +
                         (dh.array() * o.array() * (1.0 - tanh_c.array().square())).matrix();
                dyf.middleCols(t * B, B) =
                    (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
                dyi.middleCols(t * B, B) =
                    (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
                dyo.middleCols(t * B, B) =
                    (dh.array() * tanh_c.array() * o.array() * (1.0 - o.array())).matrix();
                dyg.middleCols(t * B, B) =
                    (dc.array() * i.array() * (1.0 - g.array().square())).matrix();
                dc_carry = dc.cwiseProduct(f);
                dh_carry.noalias() = p.Uf.transpose() * dyf.middleCols(t * B, B);
                dh_carry.noalias() += p.Ui.transpose() * dyi.middleCols(t * B, B);
                dh_carry.noalias() += p.Uo.transpose() * dyo.middleCols(t * B, B);
                dh_carry.noalias() += p.Uc.transpose() * dyg.middleCols(t * B, B);
            }
            const Mat& in_all = (l == 0) ? ws.x_all : ws.lstm[l - 1].h;
            Mat h_prev_all = build_prev(cache.h, ws.h0[l]);
            gp.Wf.noalias() += dyf * in_all.transpose();
            gp.Wi.noalias() += dyi * in_all.transpose();
            gp.Wo.noalias() += dyo * in_all.transpose();
            gp.Wc.noalias() += dyg * in_all.transpose();
            gp.Uf.noalias() += dyf * h_prev_all.transpose();
            gp.Ui.noalias() += dyi * h_prev_all.transpose();
            gp.Uo.noalias() += dyo * h_prev_all.transpose();
            gp.Uc.noalias() += dyg * h_prev_all.transpose();
            gp.bf += dyf.rowwise().sum();
            gp.bi += dyi.rowwise().sum();
            gp.bo += dyo.rowwise().sum();
            gp.bc += dyg.rowwise().sum();

            Mat next;
            next.noalias() = p.Wf.transpose() * dyf;
            next.noalias() += p.Wi.transpose() * dyi;
            next.noalias() += p.Wo.transpose() * dyo;
            next.noalias() += p.Wc.transpose() * dyg;
            if (l > 0) {
                d_in_all = std::move(next);
            } else {
                scatter_embedding(next);
            }
        }
    } else {
        const auto& rnn = model.rhn();
        auto& grnn = grads.rhn();
        const auto D = static_cast<size_t>(rnn.depth);
        std::vector<Mat> dap(D), dae(D), dac(rnn.coupled ? 0 : D);
        for (size_t l = 0; l < D; ++l) {
            dap[l].resize(n, B * T);
            dae[l].resize(n, B * T);
            if (!rnn.coupled) dac[l].resize(n, B * T);
        }
        Mat dh_next = Mat::Zero(n, B);
        for (Index t = T - 1; t >= 0; --t) {
            Mat dh = dh_top.middleCols(t * B, B) + dh_next;
            for (size_t l = D; l-- > 0;) {
                const auto& cache = ws.rhn[l];
                auto p = cache.p.middleCols(t * B, B);
                auto e = cache.e.middleCols(t * B, B);
                auto c = cache.c.middleCols(t * B, B);
                auto h_in = cache.h_in.middleCols(t * B, B);

                Mat de = dh.cwiseProduct(p);
                Mat dcg = dh.cwiseProduct(h_in);
                if (rnn.coupled) de -= dcg;  // c = 1 - e
                dap[l].middleCols(t * B, B) =
                    (dh.array() * e.array() * (1.0 - p.array().square())).matrix();
                dae[l].middleCols(t * B, B) =
                    (de.array() * e.array() * (1.0 - e.array())).matrix();

                Mat dh_in = dh.cwiseProduct(c);
                dh_in.noalias() += rnn.Rp[l].transpose() * dap[l].middleCols(t * B, B);
                dh_in.noalias() += rnn.Re[l].transpose() * dae[l].middleCols(t * B, B);
                if (!rnn.coupled) {
                    dac[l].middleCols(t * B, B) =
                        (dcg.array() * c.array() * (1.0 - c.array())).matrix();
                    dh_in.noalias() += rnn.Rc[l].transpose() * dac[l].middleCols(t * B, B);
                }
                dh = std::move(dh_in);
            }
            dh_next = std::move(dh);
        }
        for (size_t l = 0; l < D; ++l) {
            Mat h_in_t = ws.rhn[l].h_in.transpose();
            grnn.Rp[l].noalias() += dap[l] * h_in_t;
            grnn.Re[l].noalias() += dae[l] * h_in_t;
            grnn.bp[l] += dap[l].rowwise().sum();
            grnn.be[l] += dae[l].rowwise().sum();
            if (!rnn.coupled) {
                grnn.Rc[l].noalias() += dac[l] * h_in_t;
                grnn.bc[l] += dac[l].rowwise().sum();
            }
        }
        grnn.Wp.noalias() += dap[0] * ws.x_all.transpose();
        grnn.We.noalias() += dae[0] * ws.x_all.transpose();
        Mat dx_all;
        dx_all.noalias() = rnn.Wp.transpose() * dap[0];
        dx_all.noalias() += rnn.We.transpose() * dae[0];
        if (!rnn.coupled) {
            grnn.Wc.noalias() += dac[0] * ws.x_all.transpose();
            dx_all.noalias() += rnn.Wc.transpose() * dac[0];
        }
        scatter_embedding(dx_all);
    }
}

void zero_params(SparseModel& model) {
    auto refs = collect_params(model);
    for (Mat* m : refs.mats) m->setZero();
    for (Vec* v : refs.vecs) v->setZero();
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

double train_epoch(SparseModel& model, const BatchSet& batches, OptimizerState& opt) {
    if (batches.blocks.empty()) throw InvalidArgumentError("train_epoch: empty batch set");

    SparseModel grads = model;  // structural copy; tensors reused as buffers
    Workspace ws;
    ws.reset_carry(model, batches.batch_size);

    auto refs = collect_params(model);
    auto grefs = collect_params(grads);

    const double tokens_per_block =
        static_cast<double>(batches.batch_size) * static_cast<double>(batches.bptt);
    double loss_total = 0.0;

    for (size_t blk = 0; blk < batches.blocks.size(); ++blk) {
        zero_params(grads);
        double block_loss = forward_block(model, batches.blocks[blk], ws, true, &opt);
        if (!std::isfinite(block_loss)) {
            throw DivergedError("training loss diverged at block " + std::to_string(blk),
                                static_cast<long>(blk));
        }
        backward_block(model, grads, batches.blocks[blk], ws, tokens_per_block);
        loss_total += block_loss;

        // masked positions take no updates; keep the clip norm over the
        // actually-applied gradient
        for (size_t i = 0; i < grefs.prunable_count; ++i) {
            *grefs.mats[i] = grefs.mats[i]->cwiseProduct(model.masks.layers[i]);
        }

        double sq = 0.0;
        for (const Mat* g : grefs.mats) sq += g->squaredNorm();
        for (const Vec* g : grefs.vecs) sq += g->squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > opt.clip && norm > 0.0) {
            const double scale = opt.clip / norm;
            for (Mat* g : grefs.mats) *g *= scale;
            for (Vec* g : grefs.vecs) *g *= scale;
        }

        for (size_t i = 0; i < refs.mats.size(); ++i) *refs.mats[i] -= opt.lr * *grefs.mats[i];
        for (size_t i = 0; i < refs.vecs.size(); ++i) *refs.vecs[i] -= opt.lr * *grefs.vecs[i];
        model.enforce_masks();

        if (opt.averaging_active) accumulate_average(opt, model);
    }
    return loss_total / (tokens_per_block * static_cast<double>(batches.blocks.size()));
}

SparseModel with_averaged_params(const SparseModel& model, const OptimizerState& opt) {
    SparseModel copy = model;
    if (!opt.averaging_active || opt.avg_mats.empty()) return copy;
    auto refs = collect_params(copy);
    for (size_t i = 0; i < refs.mats.size(); ++i) *refs.mats[i] = opt.avg_mats[i];
    for (size_t i = 0; i < refs.vecs.size(); ++i) *refs.vecs[i] = opt.avg_vecs[i];
    // positions pruned after averaging began hold stale values; re-mask
    copy.enforce_masks();
    return copy;
}

double evaluate_loss(const SparseModel& model, const BatchSet& batches,
                     const OptimizerState* opt) {
    if (batches.blocks.empty()) throw InvalidArgumentError("evaluate: empty batch set");
    SparseModel eval = (opt && opt->averaging_active) ? with_averaged_params(model, *opt) : model;
    Workspace ws;
    ws.reset_carry(eval, batches.batch_size);
    double loss = 0.0;
    for (const auto& block : batches.blocks) {
        loss += forward_block(eval, block, ws, false, nullptr);
    }
    double mean = loss / static_cast<double>(batches.tokens());
    if (!std::isfinite(mean)) {
        throw DivergedError("evaluation loss is non-finite", -1);
    }
    return mean;
}

double evaluate_perplexity(const SparseModel& model, const BatchSet& batches,
                           const OptimizerState* opt) {
    return std::exp(evaluate_loss(model, batches, opt));
}

void prune_regrow_cycle(SparseModel& model, double decayed_rate, uint64_t cycle_seed) {
    auto refs = collect_params(model);
    std::vector<Mat> weights;
    weights.reserve(refs.prunable_count);
    for (size_t i = 0; i < refs.prunable_count; ++i) weights.push_back(*refs.mats[i]);

    auto dead = apply_death(weights, model.masks, decayed_rate, model.config.death_mode);
    auto redist = redistribute(dead.removed_per_layer, weights, dead.masks, nullptr,
                               model.config.redist_mode);
    model.masks = grow(dead.masks, redist.quotas, cycle_seed);
    model.enforce_masks();
}

}  // namespace lsh

#include "lsh/model.hpp"

#include "lsh/errors.hpp"
#include "lsh/rng.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace lsh {

const char* to_string(Arch a) {
    return a == Arch::stacked_lstm ? "stacked_lstm" : "rhn";
}

Arch arch_from_string(const std::string& s) {
    if (s == "stacked_lstm") return Arch::stacked_lstm;
    if (s == "rhn") return Arch::rhn;
    throw InvalidArgumentError("unknown arch: " + s + " (allowed: stacked_lstm, rhn)");
}

Index SparseModel::state_dim() const {
    return is_lstm() ? lstm().state_dim() : rhn().state_dim();
}

std::vector<Shape> SparseModel::prunable() const {
    return is_lstm() ? prunable_shapes(lstm()) : prunable_shapes(rhn());
}

void SparseModel::enforce_masks() {
    auto refs = collect_params(*this);
    for (size_t i = 0; i < refs.prunable_count; ++i) {
        *refs.mats[i] = refs.mats[i]->cwiseProduct(masks.layers[i]);
    }
}

ParamRefs collect_params(SparseModel& model) {
    ParamRefs refs;
    if (model.is_lstm()) {
        auto& p = model.lstm();
        for (auto& l : p.layers) {
            refs.mats.push_back(&l.Wf);
            refs.mats.push_back(&l.Wi);
            refs.mats.push_back(&l.Wo);
            refs.mats.push_back(&l.Wc);
            refs.mats.push_back(&l.Uf);
            refs.mats.push_back(&l.Ui);
            refs.mats.push_back(&l.Uo);
            refs.mats.push_back(&l.Uc);
        }
        refs.prunable_count = refs.mats.size();
        for (auto& l : p.layers) {
            refs.vecs.push_back(&l.bf);
            refs.vecs.push_back(&l.bi);
            refs.vecs.push_back(&l.bo);
            refs.vecs.push_back(&l.bc);
        }
    } else {
        auto& p = model.rhn();
        refs.mats.push_back(&p.Wp);
        refs.mats.push_back(&p.We);
        if (!p.coupled) refs.mats.push_back(&p.Wc);
        for (Index l = 0; l < p.depth; ++l) {
            auto i = static_cast<size_t>(l);
            refs.mats.push_back(&p.Rp[i]);
            refs.mats.push_back(&p.Re[i]);
            if (!p.coupled) refs.mats.push_back(&p.Rc[i]);
        }
        refs.prunable_count = refs.mats.size();
        for (Index l = 0; l < p.depth; ++l) {
            auto i = static_cast<size_t>(l);
            refs.vecs.push_back(&p.bp[i]);
            refs.vecs.push_back(&p.be[i]);
            if (!p.coupled) refs.vecs.push_back(&p.bc[i]);
        }
    }
    refs.mats.push_back(&model.embedding);
    if (!model.profile.tied) refs.mats.push_back(&model.decoder_w);
    refs.vecs.push_back(&model.decoder_b);
    return refs;
}

namespace {

void validate_profile(const ModelProfile& profile) {
    if (profile.vocab < 2) throw InvalidArgumentError("model: vocab must be >= 2");
    if (profile.hidden < 1 || profile.embedding < 1 || profile.layers < 1) {
        throw InvalidArgumentError("model: dimensions must be positive");
    }
    if (profile.tied && profile.embedding != profile.hidden) {
        throw InvalidArgumentError("model: tied decoder requires embedding == hidden");
    }
    if (profile.coupled && profile.arch != Arch::rhn) {
        throw InvalidArgumentError("model: coupled applies to rhn only");
    }
    if (!(profile.dropout_output >= 0.0 && profile.dropout_output < 1.0)) {
        throw InvalidArgumentError("model: dropout_output must be in [0, 1)");
    }
}

Mat uniform_mat(Rng& rng, Index rows, Index cols, double bound) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

SparseModel build_model(const ModelProfile& profile, uint64_t seed) {
    validate_profile(profile);
    SparseModel model;
    model.profile = profile;
    const double bound = 1.0 / std::sqrt(static_cast<double>(profile.hidden));
    if (profile.arch == Arch::stacked_lstm) {
        model.rnn = init_lstm(profile.embedding, profile.hidden, profile.layers,
                              derive_seed(seed, "rnn"));
    } else {
        model.rnn = init_rhn(profile.embedding, profile.hidden, profile.layers,
                             profile.coupled, derive_seed(seed, "rnn"));
    }
    Rng rng(derive_seed(seed, "head"));
    model.embedding = uniform_mat(rng, profile.embedding, profile.vocab, bound);
    if (!profile.tied) model.decoder_w = uniform_mat(rng, profile.vocab, profile.hidden, bound);
    model.decoder_b = Vec::Zero(profile.vocab);
    return model;
}

}  // namespace

SparseModel init_model(const ModelProfile& profile, const CandidateConfig& config,
                       double global_sparsity) {
    SparseModel model = build_model(profile, config.seed);
    model.config = config;
    model.masks = sparse_init(model.prunable(), config.init_mode, global_sparsity,
                              derive_seed(config.seed, "mask"));
    model.enforce_masks();
    return model;
}

SparseModel init_dense_model(const ModelProfile& profile, uint64_t seed) {
    SparseModel model = build_model(profile, seed);
    model.config.id = "dense";
    model.config.seed = seed;
    model.masks.global_sparsity = 0.0;
    for (const auto& s : model.prunable()) {
        model.masks.layers.push_back(Mat::Ones(s.rows, s.cols));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Checkpoint container. Little-endian binary:
//   magic "LSHCKPT1" | u32 version | profile | candidate config |
//   u64 tensor count | tensors (u64 rows, u64 cols, f64 data row-major)
// Tensor order: embedding, [decoder_w], decoder_b, rnn weights and biases in
// collect_params order, then masks.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'L', 'S', 'H', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ofstream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ofstream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_tensor(std::ofstream& out, const Mat& m) {
    write_u64(out, static_cast<uint64_t>(m.rows()));
    write_u64(out, static_cast<uint64_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
uint64_t read_u64(std::ifstream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
double read_f64(std::ifstream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::string read_string(std::ifstream& in) {
    auto n = read_u64(in);
    if (n > (1ull << 20)) throw InvalidDataError("checkpoint: unreasonable string length");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}
Mat read_tensor(std::ifstream& in) {
    auto rows = static_cast<Index>(read_u64(in));
    auto cols = static_cast<Index>(read_u64(in));
    if (rows < 0 || cols < 0 || rows * cols > (1ll << 30)) {
        throw InvalidDataError("checkpoint: unreasonable tensor shape");
    }
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = read_f64(in);
    return m;
}

}  // namespace

void save_checkpoint(const SparseModel& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(kMagic, sizeof(kMagic));
        write_u32(out, kVersion);

        const auto& p = model.profile;
        write_u32(out, p.arch == Arch::stacked_lstm ? 0u : 1u);
        write_u64(out, static_cast<uint64_t>(p.vocab));
        write_u64(out, static_cast<uint64_t>(p.hidden));
        write_u64(out, static_cast<uint64_t>(p.embedding));
        write_u64(out, static_cast<uint64_t>(p.layers));
        write_u32(out, p.tied ? 1u : 0u);
        write_u32(out, p.coupled ? 1u : 0u);
        write_f64(out, p.dropout_output);

        write_u32(out, static_cast<uint32_t>(model.config.init_mode));
        write_u32(out, static_cast<uint32_t>(model.config.death_mode));
        write_u32(out, static_cast<uint32_t>(model.config.redist_mode));
        write_f64(out, model.config.death_rate);
        write_u64(out, model.config.seed);
        write_string(out, model.config.id);
        write_f64(out, model.masks.global_sparsity);

        auto& mutable_model = const_cast<SparseModel&>(model);
        auto refs = collect_params(mutable_model);
        uint64_t count = refs.mats.size() + refs.vecs.size() + model.masks.layers.size();
        write_u64(out, count);
        for (const Mat* m : refs.mats) write_tensor(out, *m);
        for (const Vec* v : refs.vecs) write_tensor(out, Mat(*v));
        for (const Mat& m : model.masks.layers) write_tensor(out, m);
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

SparseModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw InvalidDataError("not a checkpoint file: " + path);
    }
    if (read_u32(in) != kVersion) throw InvalidDataError("unsupported checkpoint version");

    ModelProfile profile;
    profile.arch = read_u32(in) == 0 ? Arch::stacked_lstm : Arch::rhn;
    profile.vocab = static_cast<Index>(read_u64(in));
    profile.hidden = static_cast<Index>(read_u64(in));
    profile.embedding = static_cast<Index>(read_u64(in));
    profile.layers = static_cast<Index>(read_u64(in));
    profile.tied = read_u32(in) != 0;
    profile.coupled = read_u32(in) != 0;
    profile.dropout_output = read_f64(in);
    validate_profile(profile);

    CandidateConfig config;
    config.init_mode = static_cast<InitMode>(read_u32(in));
    config.death_mode = static_cast<DeathMode>(read_u32(in));
    config.redist_mode = static_cast<RedistMode>(read_u32(in));
    config.death_rate = read_f64(in);
    config.seed = read_u64(in);
    config.id = read_string(in);
    double global_sparsity = read_f64(in);

    // build the skeleton so collect_params sees the right shapes
    SparseModel model = build_model(profile, 0);
    model.config = config;
    model.masks.global_sparsity = global_sparsity;

    auto refs = collect_params(model);
    const size_t mask_count = model.prunable().size();
    uint64_t count = read_u64(in);
    if (count != refs.mats.size() + refs.vecs.size() + mask_count) {
        throw InvalidDataError("checkpoint: tensor count mismatch");
    }
    for (Mat* m : refs.mats) {
        Mat t = read_tensor(in);
        if (t.rows() != m->rows() || t.cols() != m->cols()) {
            throw InvalidDataError("checkpoint: tensor shape mismatch");
        }
        *m = std::move(t);
    }
    for (Vec* v : refs.vecs) {
        Mat t = read_tensor(in);
        if (t.rows() != v->size() || t.cols() != 1) {
            throw InvalidDataError("checkpoint: bias shape mismatch");
        }
        *v = t.col(0);
    }
    model.masks.layers.clear();
    for (size_t i = 0; i < mask_count; ++i) model.masks.layers.push_back(read_tensor(in));
    if (!in) throw InvalidDataError("checkpoint truncated: " + path);

    auto final_refs = collect_params(model);
    for (const Mat* m : final_refs.mats) {
        if (!m->allFinite()) throw InvalidDataError("checkpoint: non-finite parameters");
    }
    return model;
}

}  // namespace lsh
